#include <cstdio>
#include <cstdlib>
#include <string>

#include "polydepth/selftest.hpp"

int main(int argc, char** argv) {
  polydepth::SelftestOptions opts;
  for (int i = 1; i < argc; ++i) opts.criteria.push_back(std::atoi(argv[i]));
  bool all = true;
  polydepth::run_selftest(opts, [&](const polydepth::CriterionResult& r) {
    all = all && r.passed;
    std::printf("%s\n", polydepth::format_result(r).c_str());
    std::fflush(stdout);
  });
  return all ? 0 : 1;
}
