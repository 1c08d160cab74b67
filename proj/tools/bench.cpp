// Benchmark comparing the OpenMP kernels against the serial reference
// implementations on the default blob workload.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "plc/datagen.hpp"
#include "plc/model.hpp"
#include "plc/parallel.hpp"
#include "plc/rng.hpp"
#include "plc/serial.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(int repeats, F&& fn) {
  // One warm-up call, then the best of `repeats`.
  fn();
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = Clock::now();
    fn();
    const auto elapsed = Clock::now() - start;
    best = std::min(best,
                    std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed)
                        .count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-26s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  std::int64_t n = 200000;
  int repeats = 5;
  if (argc > 1) n = std::stoll(argv[1]);
  if (argc > 2) repeats = std::stoi(argv[2]);

  std::printf("threads: %d, rows: %lld\n", plc::par::max_threads(), static_cast<long long>(n));

  auto [train, test, oracle] = plc::make_gaussian_mixture(plc::default_blob_spec(), n, 10, 7);

  report("posterior_batch",
         time_ms(repeats, [&] { (void)plc::serial::posterior_batch(oracle, train.features); }),
         time_ms(repeats, [&] { (void)oracle.posterior_batch(train.features); }));

  report("margins",
         time_ms(repeats, [&] { (void)plc::serial::margins(oracle, train.features); }),
         time_ms(repeats, [&] { (void)oracle.margins(train.features); }));

  plc::Architecture arch{2, {32, 32}, 2, plc::Activation::Relu};
  plc::SoftmaxClassifier classifier(arch, 11);
  report("predict_proba",
         time_ms(repeats, [&] { (void)plc::serial::predict_proba(classifier, train.features); }),
         time_ms(repeats, [&] { (void)classifier.predict_proba(train.features); }));

  // Gradient accumulation: same kernel, one thread vs all threads.
  std::vector<double> grad;
  const int saved_threads = plc::par::max_threads();
  report("batch_gradient",
         time_ms(repeats,
                 [&] {
                   plc::par::set_max_threads(1);
                   (void)classifier.batch_gradient(train.features, train.working_labels, grad);
                   plc::par::set_max_threads(saved_threads);
                 }),
         time_ms(repeats, [&] {
           (void)classifier.batch_gradient(train.features, train.working_labels, grad);
         }));
  return 0;
}
