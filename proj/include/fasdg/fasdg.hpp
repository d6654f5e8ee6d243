#ifndef FASDG_FASDG_HPP_
#define FASDG_FASDG_HPP_

#include "fasdg/analysis.hpp"
#include "fasdg/checkpoint.hpp"
#include "fasdg/commands.hpp"
#include "fasdg/config.hpp"
#include "fasdg/core.hpp"
#include "fasdg/data.hpp"
#include "fasdg/discriminators.hpp"
#include "fasdg/grl.hpp"
#include "fasdg/imageio.hpp"
#include "fasdg/layers.hpp"
#include "fasdg/lstm.hpp"
#include "fasdg/metrics.hpp"
#include "fasdg/model.hpp"
#include "fasdg/objectives.hpp"
#include "fasdg/profile.hpp"
#include "fasdg/synthdata.hpp"
#include "fasdg/trainer.hpp"

#endif  // FASDG_FASDG_HPP_
