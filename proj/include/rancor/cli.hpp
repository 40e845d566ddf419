#pragma once

namespace rancor {

// Entry point behind the rancor executable; exit codes: 0 success,
// 1 usage error, 2 data error, 3 numerical failure.
int cli_main(int argc, const char* const* argv);

} // namespace rancor
