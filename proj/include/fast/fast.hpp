#pragma once

#include "fast/consistency.hpp"
#include "fast/embed.hpp"
#include "fast/entity.hpp"
#include "fast/error.hpp"
#include "fast/eval.hpp"
#include "fast/gradcheck.hpp"
#include "fast/graph.hpp"
#include "fast/model.hpp"
#include "fast/nsp.hpp"
#include "fast/optim.hpp"
#include "fast/params.hpp"
#include "fast/synth.hpp"
#include "fast/tensor.hpp"
#include "fast/text.hpp"
#include "fast/toy.hpp"
#include "fast/trainer.hpp"

namespace fast {
inline constexpr const char* kVersion = "0.1.0";
}
