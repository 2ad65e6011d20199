#pragma once
// Convenience include for the whole library.

#include "spgcde/common.hpp"
#include "spgcde/data/augment.hpp"
#include "spgcde/data/case_store.hpp"
#include "spgcde/data/synthetic.hpp"
#include "spgcde/harness/checkpoint.hpp"
#include "spgcde/harness/config.hpp"
#include "spgcde/harness/trainer.hpp"
#include "spgcde/metrics/losses.hpp"
#include "spgcde/metrics/metrics.hpp"
#include "spgcde/metrics/report.hpp"
#include "spgcde/model/config.hpp"
#include "spgcde/model/decoder.hpp"
#include "spgcde/model/encoder.hpp"
#include "spgcde/model/flow.hpp"
#include "spgcde/model/fusion.hpp"
#include "spgcde/model/network.hpp"
#include "spgcde/model/prior_unet.hpp"
#include "spgcde/model/refine.hpp"
#include "spgcde/nn/activations.hpp"
#include "spgcde/nn/batchnorm.hpp"
#include "spgcde/nn/compose.hpp"
#include "spgcde/nn/conv.hpp"
#include "spgcde/nn/conv_block.hpp"
#include "spgcde/nn/linear.hpp"
#include "spgcde/nn/module.hpp"
#include "spgcde/nn/pool.hpp"
#include "spgcde/nn/sgd.hpp"
#include "spgcde/nn/upsample.hpp"
#include "spgcde/prior.hpp"
#include "spgcde/rng.hpp"
#include "spgcde/serialize.hpp"
#include "spgcde/tensor.hpp"
