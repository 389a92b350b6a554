#pragma once

// Weakly supervised point cloud segmentation: masked/inexact/Siamese losses,
// manifold smoothness, closed-form label propagation, clustering baselines
// and the supporting training, evaluation and study machinery.

#include "pointseg/augment.hpp"
#include "pointseg/baselines.hpp"
#include "pointseg/encoder.hpp"
#include "pointseg/graph.hpp"
#include "pointseg/io.hpp"
#include "pointseg/losses.hpp"
#include "pointseg/metrics.hpp"
#include "pointseg/propagate.hpp"
#include "pointseg/rng.hpp"
#include "pointseg/threading.hpp"
#include "pointseg/trainer.hpp"
#include "pointseg/types.hpp"
