// Copyright 2026 The urlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include "urlab/core.hpp"
#include "urlab/hilbert.hpp"
#include "urlab/matkit.hpp"
#include "urlab/moments.hpp"
#include "urlab/parallel.hpp"
#include "urlab/relations.hpp"
#include "urlab/search.hpp"
#include "urlab/transforms.hpp"
