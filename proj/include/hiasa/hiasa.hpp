#pragma once

#include "hiasa/aspect_head.hpp"
#include "hiasa/config.hpp"
#include "hiasa/corpus.hpp"
#include "hiasa/encoder.hpp"
#include "hiasa/evalkit.hpp"
#include "hiasa/interaction.hpp"
#include "hiasa/model.hpp"
#include "hiasa/ndcore/adam.hpp"
#include "hiasa/ndcore/checkpoint.hpp"
#include "hiasa/ndcore/grad_check.hpp"
#include "hiasa/ndcore/graph.hpp"
#include "hiasa/ndcore/ops.hpp"
#include "hiasa/ndcore/params.hpp"
#include "hiasa/ndcore/tensor.hpp"
#include "hiasa/objective.hpp"
#include "hiasa/sentiment_head.hpp"
#include "hiasa/synthetic.hpp"
#include "hiasa/trainer.hpp"
