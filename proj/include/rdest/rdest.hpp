#pragma once

#include "rdest/adam.hpp"
#include "rdest/autodiff.hpp"
#include "rdest/binary_io.hpp"
#include "rdest/codec.hpp"
#include "rdest/dataset.hpp"
#include "rdest/errors.hpp"
#include "rdest/evaluation.hpp"
#include "rdest/frame.hpp"
#include "rdest/grad_check.hpp"
#include "rdest/image_io.hpp"
#include "rdest/metrics.hpp"
#include "rdest/networks.hpp"
#include "rdest/parameter.hpp"
#include "rdest/plot.hpp"
#include "rdest/rng.hpp"
#include "rdest/tensor.hpp"
#include "rdest/text.hpp"
#include "rdest/train.hpp"
#include "rdest/weights.hpp"
