// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "iwsr/ad/gradcheck.hpp"

namespace iwsr::testing {

using TensorD = ad::Tensor<double>;
using ad::GradCheckResult;
using ad::gradcheck;
using ad::project;
using ad::random_tensor;
using ad::relative_error;

}  // namespace iwsr::testing
