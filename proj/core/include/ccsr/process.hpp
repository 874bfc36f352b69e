// Copyright 2026 The CCSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ccsr {

/// Runs `command` through /bin/sh with stdout and stderr appended to
/// `log_file`. Blocks until exit and returns the exit status (128 + signal
/// for signalled children).
int run_shell(const std::string& command, const std::filesystem::path& log_file);

/// Single-quotes text for safe interpolation into a shell command.
std::string shell_quote(std::string_view text);

/// Last `max_lines` lines of a text file ("" if it does not exist).
std::string tail_lines(const std::filesystem::path& file, std::size_t max_lines);

}  // namespace ccsr
