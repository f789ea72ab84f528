#pragma once

#include <iosfwd>

namespace thyia {

// Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace thyia
