// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "moctk/action_codec.hpp"
#include "moctk/bench.hpp"
#include "moctk/calibration.hpp"
#include "moctk/error.hpp"
#include "moctk/frame_store.hpp"
#include "moctk/moc.hpp"
#include "moctk/prompt_engine.hpp"
#include "moctk/tabletop_sim.hpp"
#include "moctk/token_encoder.hpp"
