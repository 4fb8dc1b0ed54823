#pragma once

#include <iosfwd>

namespace exfl {

/// Entry point of the command-line tool. Exit status: 0 success, 1 usage
/// error, 2 stage failure.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace exfl
