// Copyright (c) 2026 The sis Authors. All rights reserved.
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

#include "sis/crf.hpp"
#include "sis/error.hpp"
#include "sis/io.hpp"
#include "sis/metrics.hpp"
#include "sis/netblocks.hpp"
#include "sis/npy.hpp"
#include "sis/pipeline.hpp"
#include "sis/pnm.hpp"
#include "sis/resize.hpp"
#include "sis/slic.hpp"
#include "sis/spectral.hpp"
#include "sis/symmetric_eigen.hpp"
#include "sis/synth.hpp"
#include "sis/tensor.hpp"
