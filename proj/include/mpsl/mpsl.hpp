// Copyright 2026 The mpsl Authors
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

#pragma once

#include "mpsl/analysis.hpp"
#include "mpsl/config.hpp"
#include "mpsl/decode.hpp"
#include "mpsl/demux.hpp"
#include "mpsl/geometry.hpp"
#include "mpsl/image.hpp"
#include "mpsl/image_io.hpp"
#include "mpsl/optics.hpp"
#include "mpsl/parallel.hpp"
#include "mpsl/pattern.hpp"
#include "mpsl/pipeline.hpp"
#include "mpsl/range.hpp"
#include "mpsl/range_image.hpp"
#include "mpsl/scene.hpp"
