// Acceptance run: one line per criterion, nonzero exit if any fails.
//
//   acceptance [--budget full|small] [--workers N] [--only 1,2,...] [--expected-fail 7,...]
//              [--report FILE]
//
// --expected-fail lists criteria documented as unattainable (README). They
// still print FAIL; the exit code is 0 only if exactly those fail.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rfflab/verify.hpp"

int main(int argc, char** argv) {
  rfflab::VerifyOptions o;
  std::set<int> only, expected;
  std::string report;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string k = argv[i], v = argv[i + 1];
    if (k == "--budget") o.budget = v == "small" ? rfflab::Budget::small : rfflab::Budget::full;
    else if (k == "--report") report = v;
    else if (k == "--workers") o.workers = static_cast<unsigned>(std::stoul(v));
    else if (k == "--only" || k == "--expected-fail") {
      std::stringstream ss(v);
      for (std::string t; std::getline(ss, t, ',');) (k == "--only" ? only : expected).insert(std::stoi(t));
    } else {
      std::cerr << "unknown option " << k << '\n';
      return 1;
    }
  }
  std::set<int> which = only;
  if (which.empty())
    for (int c = 1; c <= 10; ++c) which.insert(c);

  o.log = [](const std::string& m) {
    if (m.rfind("criterion", 0) != 0) std::cerr << "# " << m << std::endl;
  };
  const auto results = rfflab::run_criteria(std::vector<int>(which.begin(), which.end()), o);
  std::ostringstream lines;
  int failed = 0, unexpected = 0;
  for (const auto& r : results) {
    const bool known = expected.count(r.criterion) > 0;
    lines << "criterion " << r.criterion << ' ' << (r.pass ? "PASS" : "FAIL") << " [" << r.name << "] " << r.detail
              << " (" << r.seconds << " s)" << (!r.pass && known ? " [expected failure, see README]" : "") << '\n';
    if (!r.pass) ++failed;
    if (r.pass == known) ++unexpected;  // a new failure, or an expected failure that passed
  }
  lines << results.size() - failed << '/' << results.size() << " passed";
  if (!expected.empty()) lines << "; " << (unexpected ? "outcome differs from the expected-failure list" : "failures match the expected list");
  lines << '\n';
  std::cout << lines.str() << std::flush;
  if (!report.empty()) std::ofstream(report) << lines.str();
  return unexpected ? EXIT_FAILURE : EXIT_SUCCESS;
}
