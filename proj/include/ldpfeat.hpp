// Copyright 2026 The ldpfeat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include "ldpfeat/attacks.hpp"
#include "ldpfeat/common.hpp"
#include "ldpfeat/corpus.hpp"
#include "ldpfeat/dictionary.hpp"
#include "ldpfeat/experiments.hpp"
#include "ldpfeat/geometry.hpp"
#include "ldpfeat/harness.hpp"
#include "ldpfeat/io.hpp"
#include "ldpfeat/ldp.hpp"
#include "ldpfeat/lifting.hpp"
#include "ldpfeat/matching.hpp"
#include "ldpfeat/parallel.hpp"
#include "ldpfeat/rng.hpp"
