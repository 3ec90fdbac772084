#pragma once

#include "camstat/bundle.hpp"
#include "camstat/cam.hpp"
#include "camstat/error.hpp"
#include "camstat/experiment.hpp"
#include "camstat/focus.hpp"
#include "camstat/manifest.hpp"
#include "camstat/minicnn.hpp"
#include "camstat/overlay.hpp"
#include "camstat/random.hpp"
#include "camstat/report.hpp"
#include "camstat/splits.hpp"
#include "camstat/stats.hpp"
#include "camstat/synthetic.hpp"
#include "camstat/synthetic_io.hpp"
#include "camstat/tensor.hpp"
#include "camstat/train.hpp"
