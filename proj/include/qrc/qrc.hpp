// Copyright 2026 The qrc-rydberg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "qrc/cache.hpp"
#include "qrc/classical_sim.hpp"
#include "qrc/core_model.hpp"
#include "qrc/datasets.hpp"
#include "qrc/embeddings.hpp"
#include "qrc/encode.hpp"
#include "qrc/errors.hpp"
#include "qrc/kernel_geometry.hpp"
#include "qrc/learners.hpp"
#include "qrc/noise.hpp"
#include "qrc/observables.hpp"
#include "qrc/parallel.hpp"
#include "qrc/pipeline.hpp"
#include "qrc/preprocess.hpp"
#include "qrc/probe_plan.hpp"
#include "qrc/program_io.hpp"
#include "qrc/quantum_sim.hpp"
#include "qrc/rng.hpp"
#include "qrc/shot_table.hpp"
