// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "plcor/bench.hpp"
#include "plcor/depth_png.hpp"
#include "plcor/gradcheck.hpp"
#include "plcor/kitti_io.hpp"
#include "plcor/losses.hpp"
#include "plcor/optimize.hpp"
#include "plcor/projection.hpp"
#include "plcor/sparsifier.hpp"
#include "plcor/synth.hpp"
#include "plcor/tensor_io.hpp"
#include "plcor/types.hpp"
#include "plcor/voxelizer.hpp"
