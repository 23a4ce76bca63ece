// Compares the serial reference kernels against the OpenMP backend and
// reports speedups, plus one end-to-end training-step comparison.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "hamprune/kernels.hpp"
#include "hamprune/search.hpp"

using namespace hamprune;

namespace {

using Clock = std::chrono::steady_clock;

double bench(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

void row(const char* name, const char* size, double serial_ms, double par_ms, bool equal) {
    std::printf("%-22s %-18s %10.3f %10.3f %8.2fx  %s\n", name, size, serial_ms, par_ms,
                serial_ms / par_ms, equal ? "bitwise-equal" : "MISMATCH");
}

Tensor random_tensor(std::vector<size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-1, 1);
    for (auto& x : t.v) x = dist(rng);
    return t;
}

bool same(const Tensor& a, const Tensor& b) {
    return std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

void bench_matmul(size_t m, size_t k, size_t n, Rng& rng) {
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    Tensor c1({m, n}), c2({m, n});
    int reps = 2000000 / int(m * n) + 3;
    double s = bench([&] { kernels::serial::matmul_nn(a.data(), b.data(), c1.data(), m, k, n,
                                                      false); },
                     reps);
    double p = bench(
        [&] { kernels::par::matmul_nn(a.data(), b.data(), c2.data(), m, k, n, false); }, reps);
    char size[64];
    std::snprintf(size, sizeof size, "%zux%zux%zu", m, k, n);
    row("matmul_nn", size, s, p, same(c1, c2));
}

void bench_train_step() {
    SyntheticSpec spec;
    spec.fields = {{300, 4, 1.0}, {200, 4, 1.0}, {100, 0, 1.0}, {50, 2, 1.0}};
    Dataset data = synthesize(spec, 4096, 9);
    Splits splits = split(data, {0.9, 0.05, 0.05}, 9);

    SearchConfig cfg;
    cfg.batch_size = 2048;
    cfg.target_size = 16;
    ModelSetup setup;
    setup.model.kind = ModelKind::kDeepFm;
    setup.model.mlp_hidden = {64, 64};
    setup.base_dims = {16, 16, 16, 16};
    setup.proj_dim = 16;

    std::vector<uint32_t> cards;
    for (const auto& f : splits.train.schema->fields) cards.push_back(f.cardinality);

    auto run_steps = [&](int steps) {
        Rng rng(1);
        EmbeddingLayer layer = make_embedding_layer(cards, setup.base_dims, true, 16, rng);
        CtrModel model = make_model(setup.model, layer, cards, rng);
        Adam opt(1e-3);
        BatchSampler sampler(splits.train.n_rows(), cfg.batch_size, 3);
        std::vector<double> ones(layer.total_columns(), 1.0);
        double last = 0;
        for (int i = 0; i < steps; ++i) {
            Batch batch = make_batch(splits.train, sampler.next_rows());
            last = train_batch(model, layer, batch, ones, true, cfg, opt);
        }
        return last;
    };

    int steps = 20;
    kernels::set_parallel(false);
    auto t0 = Clock::now();
    double loss_serial = run_steps(steps);
    double ms_serial =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / steps;

    kernels::set_parallel(true);
    t0 = Clock::now();
    double loss_par = run_steps(steps);
    double ms_par = std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / steps;

    char size[64];
    std::snprintf(size, sizeof size, "deepfm b=%zu", cfg.batch_size);
    row("train_batch", size, ms_serial, ms_par, loss_serial == loss_par);
}

}  // namespace

int main() {
    Rng rng(7);
#ifdef _OPENMP
    std::printf("OpenMP backend enabled\n");
#else
    std::printf("built without OpenMP; parallel backend aliases the serial one\n");
#endif
    std::printf("%-22s %-18s %10s %10s %9s\n", "kernel", "size", "serial ms", "omp ms",
                "speedup");

    bench_matmul(256, 64, 64, rng);
    bench_matmul(1024, 128, 128, rng);
    bench_matmul(2048, 256, 64, rng);

    {
        size_t n = 1 << 22;
        Tensor a = random_tensor({n}, rng), b = random_tensor({n}, rng), o1({n}), o2({n});
        double s = bench([&] { kernels::serial::vmul(a.data(), b.data(), o1.data(), n); }, 10);
        double p = bench([&] { kernels::par::vmul(a.data(), b.data(), o2.data(), n); }, 10);
        row("vmul", "4M", s, p, same(o1, o2));

        double r1 = 0, r2 = 0;
        s = bench([&] { r1 = kernels::serial::reduce_sum(a.data(), n); }, 10);
        p = bench([&] { r2 = kernels::par::reduce_sum(a.data(), n); }, 10);
        row("reduce_sum", "4M", s, p, r1 == r2);

        s = bench([&] { kernels::serial::sigmoid(a.data(), o1.data(), n); }, 10);
        p = bench([&] { kernels::par::sigmoid(a.data(), o2.data(), n); }, 10);
        row("sigmoid", "4M", s, p, same(o1, o2));
    }

    {
        size_t rows = 4096, cols = 16, tab = 1000;
        Tensor src = random_tensor({rows, cols}, rng);
        std::vector<uint32_t> idx(rows);
        std::uniform_int_distribution<uint32_t> pick(0, uint32_t(tab - 1));
        for (auto& i : idx) i = pick(rng);
        Tensor t1({tab, cols}), t2({tab, cols});
        double s = bench(
            [&] {
                t1.fill(0);
                kernels::serial::scatter_add_rows(t1.data(), idx.data(), src.data(), rows, cols);
            },
            50);
        double p = bench(
            [&] {
                t2.fill(0);
                kernels::par::scatter_add_rows(t2.data(), idx.data(), src.data(), rows, cols);
            },
            50);
        row("scatter_add_rows", "4096x16", s, p, same(t1, t2));
    }

    bench_train_step();
    return 0;
}
