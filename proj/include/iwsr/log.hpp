// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

namespace iwsr {

/// Receives non-fatal warnings. The default sink writes "warning: <msg>" to stderr.
using WarningSink = std::function<void(const std::string&)>;

/// Installs a sink and returns the previous one. An empty sink restores the default.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace iwsr
