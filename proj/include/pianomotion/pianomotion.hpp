#pragma once

#include "pianomotion/error.hpp"
#include "pianomotion/midi.hpp"
#include "pianomotion/motion.hpp"
#include "pianomotion/hand_model.hpp"
#include "pianomotion/motion_pipeline.hpp"
#include "pianomotion/gaussian.hpp"
#include "pianomotion/embedder.hpp"
#include "pianomotion/transport.hpp"
#include "pianomotion/gmm.hpp"
#include "pianomotion/metrics.hpp"
#include "pianomotion/diffusion.hpp"
#include "pianomotion/tensor_io.hpp"
#include "pianomotion/dataset_io.hpp"
#include "pianomotion/evaluation.hpp"
