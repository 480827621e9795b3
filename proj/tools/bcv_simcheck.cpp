// Monte Carlo check of the setting-mean variance formulas on synthetic
// error tables.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "bcv/simcheck.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Compare empirical and formula variances of setting means on simulated tables"};
    double sigma_pi = 0.173;
    double sigma_rho = 0.1;
    double sigma_eps = 0.2;
    double mu = 10.0;
    double tau_range = 0.5;
    std::size_t settings = 8;
    std::size_t n_p = 4;
    std::size_t n_r = 4;
    std::size_t n_rcv = 16;
    std::size_t reps = 10000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    bool uniform = false;
    std::string out;

    app.add_option("--sigma-pi", sigma_pi, "Std. dev. of the CV-partition effect");
    app.add_option("--sigma-rho", sigma_rho, "Std. dev. of the learner-seed effect");
    app.add_option("--sigma-eps", sigma_eps, "Std. dev. of the remainder");
    app.add_option("--mu", mu, "Grand mean");
    app.add_option("--tau-range", tau_range, "Spread of the setting effects");
    app.add_option("--settings", settings, "Number of settings")->check(CLI::PositiveNumber);
    app.add_option("--np", n_p, "CV blocks for BCV")->check(CLI::PositiveNumber);
    app.add_option("--nr", n_r, "Learner blocks for BCV")->check(CLI::PositiveNumber);
    app.add_option("--rcv", n_rcv, "Repetitions for RCV")->check(CLI::PositiveNumber);
    app.add_option("--reps", reps, "Simulated tables per design (>= 1000)");
    app.add_option("--seed", seed, "Simulation seed");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--uniform", uniform, "Uniform instead of Gaussian draws");
    app.add_option("--out", out, "Also write the report CSV here");
    CLI11_PARSE(app, argc, argv);

    try {
        bcv::SyntheticModel model;
        model.mu = mu;
        model.tau = bcv::linear_tau(settings, tau_range);
        model.sigma_pi = sigma_pi;
        model.sigma_rho = sigma_rho;
        model.sigma_eps = sigma_eps;
        model.noise = uniform ? bcv::NoiseKind::Uniform : bcv::NoiseKind::Gaussian;
        model.seed = seed;
        const std::vector<bcv::SimShape> shapes{bcv::SimShape::bcv(n_p, n_r), bcv::SimShape::nx0(n_p),
                                                bcv::SimShape::rcv(n_rcv)};
        const auto rows = bcv::validate_variance_formulas(model, shapes, reps, threads);
        bcv::write_variance_csv(std::cout, rows);
        if (!out.empty()) {
            std::ofstream f(out);
            bcv::write_variance_csv(f, rows);
        }
        for (const auto& r : rows)
            if (!r.pass)
                return 2;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "bcv-simcheck: error: " << e.what() << '\n';
        return 1;
    }
}
