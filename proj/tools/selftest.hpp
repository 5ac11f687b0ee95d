#pragma once

#include <iosfwd>

// Quick in-process property checks; returns the number of failures.
int run_selftest(std::ostream& out);
