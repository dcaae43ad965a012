#include <cstdio>
#include <cstring>

#include "escapedim/verify.hpp"

// Runs every acceptance criterion and prints one line per criterion.
int main(int argc, char** argv) {
    escapedim::VerifyOptions options;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--quick") == 0) options.quick = true;
    const escapedim::VerifyReport report = escapedim::run_all(options, [](const escapedim::CriterionResult& r) {
        std::printf("%s\n", escapedim::format_result(r).c_str());
        std::fflush(stdout);
    });
    int failed = 0;
    for (const auto& r : report.results) failed += r.passed ? 0 : 1;
    std::printf("%zu criteria, %d failed\n", report.results.size(), failed);
    return failed == 0 ? 0 : 1;
}
