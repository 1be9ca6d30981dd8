// Copyright 2026 The pcm-toolkit Authors.
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
//
#pragma once

#include "pcm/change/projector.hpp"
#include "pcm/common.hpp"
#include "pcm/edit/editor.hpp"
#include "pcm/edit/patch_db.hpp"
#include "pcm/edit/portable.hpp"
#include "pcm/edit/script.hpp"
#include "pcm/eval/metrics.hpp"
#include "pcm/geom/camera.hpp"
#include "pcm/geom/hull.hpp"
#include "pcm/geom/spatial_index.hpp"
#include "pcm/geom/types.hpp"
#include "pcm/io/binary.hpp"
#include "pcm/io/ply.hpp"
#include "pcm/io/png.hpp"
#include "pcm/scene/builder.hpp"
#include "pcm/scene/cuboid.hpp"
#include "pcm/scene/taxonomy.hpp"
#include "pcm/scene/voxel_scene.hpp"
#include "pcm/synth/generator.hpp"
#include "pcm/synth/raycast.hpp"
#include "pcm/update/registration.hpp"
#include "pcm/update/visibility.hpp"
