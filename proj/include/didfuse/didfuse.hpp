#pragma once

#include "didfuse/error.hpp"
#include "didfuse/tensor.hpp"
#include "didfuse/conv.hpp"
#include "didfuse/batchnorm.hpp"
#include "didfuse/activation.hpp"
#include "didfuse/concat.hpp"
#include "didfuse/net.hpp"
#include "didfuse/ssim.hpp"
#include "didfuse/loss.hpp"
#include "didfuse/trainer.hpp"
#include "didfuse/fusion.hpp"
#include "didfuse/image.hpp"
#include "didfuse/codec.hpp"
#include "didfuse/dataset.hpp"
#include "didfuse/config.hpp"
#include "didfuse/checkpoint.hpp"
#include "didfuse/metrics.hpp"
#include "didfuse/vif.hpp"
#include "didfuse/report.hpp"
#include "didfuse/baseline.hpp"
