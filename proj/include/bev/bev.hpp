#pragma once

#include "bev/baseline.hpp"
#include "bev/dataset.hpp"
#include "bev/errors.hpp"
#include "bev/geometry.hpp"
#include "bev/io.hpp"
#include "bev/metrics.hpp"
#include "bev/nn/adam.hpp"
#include "bev/nn/checkpoint.hpp"
#include "bev/nn/layers.hpp"
#include "bev/nn/loss.hpp"
#include "bev/nn/model.hpp"
#include "bev/nn/spatial_transformer.hpp"
#include "bev/nn/tensor.hpp"
#include "bev/raster.hpp"
#include "bev/scene.hpp"
#include "bev/train.hpp"
