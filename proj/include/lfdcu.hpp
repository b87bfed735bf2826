// Copyright 2026 The lfdcu Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "lfdcu/alloc.hpp"
#include "lfdcu/errors.hpp"
#include "lfdcu/tensor.hpp"
#include "lfdcu/lightfield.hpp"
#include "lfdcu/lowlight_sim.hpp"
#include "lfdcu/autodiff.hpp"
#include "lfdcu/ops.hpp"
#include "lfdcu/dpef.hpp"
#include "lfdcu/unfold.hpp"
#include "lfdcu/metrics.hpp"
#include "lfdcu/train.hpp"
#include "lfdcu/io/png.hpp"
#include "lfdcu/io/config.hpp"
#include "lfdcu/io/lf_dir.hpp"
#include "lfdcu/io/weights.hpp"
#include "lfdcu/io/dataset.hpp"
