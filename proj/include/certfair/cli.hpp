// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver. Subcommands: synth, train, eval, certify, explain,
// debias-embeddings. Every option can also be given in a flat JSON config
// file passed with --config; flags override the file, which overrides the
// defaults. Each run writes the merged settings to <out>/config.json.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#ifndef CERTFAIR_CLI_HPP_
#define CERTFAIR_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace certfair {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace certfair

#endif  // CERTFAIR_CLI_HPP_
