#pragma once

#include "inkgan/checkpoint.hpp"
#include "inkgan/config.hpp"
#include "inkgan/conv.hpp"
#include "inkgan/data.hpp"
#include "inkgan/errors.hpp"
#include "inkgan/image.hpp"
#include "inkgan/losses.hpp"
#include "inkgan/metrics.hpp"
#include "inkgan/nets.hpp"
#include "inkgan/norm.hpp"
#include "inkgan/ops.hpp"
#include "inkgan/optim.hpp"
#include "inkgan/parallel.hpp"
#include "inkgan/random.hpp"
#include "inkgan/report.hpp"
#include "inkgan/synth.hpp"
#include "inkgan/tensor.hpp"
#include "inkgan/trainer.hpp"
