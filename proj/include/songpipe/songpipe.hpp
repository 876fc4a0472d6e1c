/**
 * @file songpipe.hpp
 * @brief Umbrella header for the whole library.
 */
#pragma once

#include "songpipe/audio.hpp"
#include "songpipe/beat_inference.hpp"
#include "songpipe/chords.hpp"
#include "songpipe/conditioning.hpp"
#include "songpipe/error.hpp"
#include "songpipe/harmonizer.hpp"
#include "songpipe/matrix.hpp"
#include "songpipe/metrics.hpp"
#include "songpipe/pipeline.hpp"
#include "songpipe/render.hpp"
#include "songpipe/score.hpp"
#include "songpipe/score_io.hpp"
#include "songpipe/symbolic_prep.hpp"
#include "songpipe/window_planner.hpp"
