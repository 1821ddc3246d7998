// Copyright 2026 The sketchpipe Authors.
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

#include "sketchpipe/bounds.hpp"
#include "sketchpipe/cluster.hpp"
#include "sketchpipe/datagen.hpp"
#include "sketchpipe/dense_matrix.hpp"
#include "sketchpipe/error.hpp"
#include "sketchpipe/estimators.hpp"
#include "sketchpipe/experiments.hpp"
#include "sketchpipe/idx.hpp"
#include "sketchpipe/io.hpp"
#include "sketchpipe/parallel.hpp"
#include "sketchpipe/random.hpp"
#include "sketchpipe/sketch.hpp"
#include "sketchpipe/source.hpp"
#include "sketchpipe/transform.hpp"
