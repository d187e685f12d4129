// Acceptance suite: one line per criterion, exit status 1 if any fails.
#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>

#include "coarsen/acceptance.hpp"

int main(int argc, char** argv)
{
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    auto results = coarsen::acceptance::run(only, [](const coarsen::acceptance::Result& r) {
        std::printf("%s\n", coarsen::acceptance::format_line(r).c_str());
        std::fflush(stdout);
    });
    for (const auto& r : results) failed += !r.pass;
    std::printf("%zu criteria, %d failed\n", results.size(), failed);
    return failed ? 1 : 0;
}
