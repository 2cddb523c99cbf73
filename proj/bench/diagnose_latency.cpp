// End-to-end POST /api/v1/diagnose latency against a synthetic index.
//
//   diagnose_latency [--records N] [--seconds S] [--requests R] [--budget-ms B]
//
// Exits 1 if p95 exceeds the budget or any request fails.

#include <CLI11.hpp>

#include <cstdio>

#include "latency.hpp"

int main(int argc, char** argv) {
  std::size_t records = 65;
  double seconds = 10.0;
  std::size_t requests = 50;
  double budget_ms = 500.0;

  CLI::App app{"diagnose latency benchmark"};
  app.add_option("--records", records)->check(CLI::Range(2, 100000));
  app.add_option("--seconds", seconds)->check(CLI::Range(1.0, 30.0));
  app.add_option("--requests", requests)->check(CLI::PositiveNumber);
  app.add_option("--budget-ms", budget_ms);
  CLI11_PARSE(app, argc, argv);

  const auto r = otomech::testing::measure_diagnose_latency(records, seconds, requests);
  std::printf("index records    %zu\n", r.index_records);
  std::printf("query length     %.1f s\n", r.query_seconds);
  std::printf("requests         %zu (%zu failed)\n", r.samples_ms.size(), r.failed_requests);
  std::printf("p50              %.1f ms\n", r.percentile(50));
  std::printf("p95              %.1f ms\n", r.percentile(95));
  std::printf("max              %.1f ms\n", r.percentile(100));
  return (r.failed_requests == 0 && r.percentile(95) <= budget_ms) ? 0 : 1;
}
