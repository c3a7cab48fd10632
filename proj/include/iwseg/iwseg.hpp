#pragma once

#include "iwseg/bootstrap.hpp"
#include "iwseg/components.hpp"
#include "iwseg/detection.hpp"
#include "iwseg/evaluation.hpp"
#include "iwseg/losses.hpp"
#include "iwseg/nifti.hpp"
#include "iwseg/preprocess.hpp"
#include "iwseg/sampler.hpp"
#include "iwseg/vol_io.hpp"
#include "iwseg/volume.hpp"
#include "iwseg/weighting.hpp"

namespace iwseg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace iwseg
