// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sentmatch/autodiff.hpp"
#include "sentmatch/char_cnn.hpp"
#include "sentmatch/checkpoint.hpp"
#include "sentmatch/commands.hpp"
#include "sentmatch/config.hpp"
#include "sentmatch/data_io.hpp"
#include "sentmatch/embeddings.hpp"
#include "sentmatch/grad_check.hpp"
#include "sentmatch/io.hpp"
#include "sentmatch/lstm.hpp"
#include "sentmatch/match_cnn.hpp"
#include "sentmatch/matching.hpp"
#include "sentmatch/metrics.hpp"
#include "sentmatch/model.hpp"
#include "sentmatch/objectives.hpp"
#include "sentmatch/tensor.hpp"
#include "sentmatch/trainer.hpp"
#include "sentmatch/tree_lstm.hpp"
