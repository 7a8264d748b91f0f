#pragma once

namespace wayfinder {

// Exit codes: 0 success, 1 the task itself failed (episode aborted, check
// over threshold, scenario error), 2 bad usage or configuration.
int cli_main(int argc, char** argv);

}  // namespace wayfinder
