#pragma once

namespace vgs {

// Parses a command line of the form `vgs <subcommand> [flags...]` and runs
// it. Returns the process exit code: 0 when every requested output was
// written, nonzero with a single-line diagnostic on stderr otherwise.
int cli_main(int argc, const char* const* argv);

}  // namespace vgs
