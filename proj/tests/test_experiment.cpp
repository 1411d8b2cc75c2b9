#include "cohsim/experiment.hpp"
#include "cohsim/text_io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>

using namespace cohsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("cohsim_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    return dir;
}

SweepConfig small_sweep()
{
    SweepConfig c;
    c.grid.n_samples = 60'000;
    c.emitter_counts = {1, 3, 10, 30};
    c.replicates = 2;
    c.max_lag_steps = 5'000;
    c.threads = 1;
    return c;
}

ResultRow row_with(double l_pew, FwhmStatus status = FwhmStatus::Ok)
{
    ResultRow r;
    r.model = ModelTag::M2;
    r.n_emitters = 10;
    r.l_pew_um = l_pew;
    r.fwhm_status = status;
    return r;
}

}  // namespace

TEST_SUITE("aggregate")
{
    TEST_CASE("two replicates 10 and 20")
    {
        const std::vector rows{row_with(10.0), row_with(20.0, FwhmStatus::NoCrossing)};
        const auto agg = aggregate(rows);
        REQUIRE(agg.size() == 1);
        CHECK(agg[0].replicates == 2);
        CHECK(agg[0].l_pew_mean_um == 15.0);
        CHECK(agg[0].l_pew_sd_um == doctest::Approx(7.0710678118654755).epsilon(1e-14));
        CHECK(agg[0].l_pew_cv == doctest::Approx(7.0710678118654755 / 15.0));
        CHECK(agg[0].fwhm_ill_defined_count == 1);
    }

    TEST_CASE("single replicate has zero spread")
    {
        const std::vector rows{row_with(12.5)};
        const auto agg = aggregate(rows);
        REQUIRE(agg.size() == 1);
        CHECK(agg[0].l_pew_sd_um == 0.0);
        CHECK(agg[0].l_pew_cv == 0.0);
    }

    TEST_CASE("failed rows are skipped")
    {
        auto failed = row_with(1e9);
        failed.error = "boom";
        const std::vector rows{row_with(4.0), failed};
        const auto agg = aggregate(rows);
        REQUIRE(agg.size() == 1);
        CHECK(agg[0].replicates == 1);
        CHECK(agg[0].l_pew_mean_um == 4.0);
    }
}

TEST_SUITE("run_point")
{
    TEST_CASE("is deterministic")
    {
        SimulationGrid grid;
        grid.n_samples = 100'000;
        const auto a = run_point(M2Params{}, 5, grid, 99, 5'000);
        const auto b = run_point(M2Params{}, 5, grid, 99, 5'000);
        CHECK(a.l_pew_um == b.l_pew_um);
        CHECK(format_number(a.l_fwhm_um) == format_number(b.l_fwhm_um));
        CHECK(a.gamma_peak == b.gamma_peak);
        CHECK(std::isnan(a.wall_ms));
        CHECK(run_point(M2Params{}, 5, grid, 99, 5'000, true).wall_ms >= 0.0);
    }

    TEST_CASE("M1 without jumps saturates at the truncation bound")
    {
        M1Params p;
        p.jump_rate = 0.0;
        SimulationGrid grid;
        grid.n_samples = 400'000;
        const auto r = run_point(p, 1, grid, 3, 20'000);
        CHECK(r.max_lag_fs == doctest::Approx(800.0));
        CHECK(r.l_pew_um == doctest::Approx(kSpeedOfLightUmPerFs * 800.0).epsilon(0.01));
        CHECK(r.fwhm_status == FwhmStatus::NoCrossing);
        CHECK(std::isnan(r.l_fwhm_um));
    }

    TEST_CASE("M2 single emitter: l_pew equals the integral of the measured |gamma|^2")
    {
        SimulationGrid grid;
        grid.n_samples = 200'000;
        const auto r = run_point(M2Params{}, 1, grid, 17, 5'000);
        const auto sig = generate_superposition(M2Params{}, 1, grid, 17);
        const auto g = autocorrelation_direct(sig, 5'000);
        double integral = 0.0;
        for (Index k = -5'000; k < 5'000; ++k)
            integral += 0.5 * (g.at(k) * g.at(k) + g.at(k + 1) * g.at(k + 1)) * grid.dt_fs;
        CHECK(r.l_pew_um == doctest::Approx(kSpeedOfLightUmPerFs * integral).epsilon(1e-9));
    }

    TEST_CASE("M2 l_pew approaches the period-spread limit")
    {
        // Pulses carry independent periods T ~ N(2, 0.2), so the ensemble
        // gamma is E_T[cos(2 pi t / T)] under a slow pulse envelope. Its
        // |gamma|^2 integral is the limit for many pulses.
        const double c = 50.0;
        const auto mean_cos = [](double t) {
            double s = 0.0, w = 0.0;
            for (int i = -800; i <= 800; ++i) {
                const double z = i / 100.0;
                const double weight = std::exp(-0.5 * z * z);
                s += weight * std::cos(kTwoPi * t / (2.0 + 0.2 * z));
                w += weight;
            }
            return s / w;
        };
        double limit = 0.0;
        for (int i = -20'000; i <= 20'000; ++i) {
            const double t = i * 0.04;
            const double g = std::exp(-t * t / (2.0 * c * c)) * mean_cos(t);
            limit += g * g * 0.04;
        }
        limit *= kSpeedOfLightUmPerFs;
        CHECK(limit == doctest::Approx(0.846).epsilon(0.02));

        const auto r = run_point(M2Params{}, 100, SimulationGrid{}, 8, 20'000);
        CHECK(r.l_pew_um == doctest::Approx(limit).epsilon(0.1));
    }

    TEST_CASE("degenerate signal is reported in the row")
    {
        M2Params p;
        p.emission_rate = 1e-12;
        SimulationGrid grid;
        grid.n_samples = 1'000;
        SweepConfig c;
        c.m1.reset();
        c.m2 = p;
        c.grid = grid;
        c.emitter_counts = {1};
        c.replicates = 2;
        c.max_lag_steps = 100;
        const auto result = run_sweep(c);
        REQUIRE(result.rows.size() == 2);
        CHECK(result.rows[0].failed());
        CHECK(result.rows[0].error.find("degenerate") != std::string::npos);
        CHECK(result.aggregates.at(0).replicates == 0);
        const auto csv = rows_csv_text(result.rows);
        CHECK(csv.find("ERROR") != std::string::npos);
    }
}

TEST_SUITE("sweep")
{
    TEST_CASE("cardinality and canonical order")
    {
        const auto result = run_sweep(small_sweep());
        REQUIRE(result.rows.size() == 16);
        std::size_t i = 0;
        for (ModelTag model : {ModelTag::M1, ModelTag::M2})
            for (Index n : {1, 3, 10, 30})
                for (int rep = 0; rep < 2; ++rep, ++i) {
                    CHECK(result.rows[i].model == model);
                    CHECK(result.rows[i].n_emitters == n);
                    CHECK(result.rows[i].replicate == rep);
                    CHECK(result.rows[i].seed == replicate_seed(42, model, n, rep));
                }
        CHECK(result.aggregates.size() == 8);
        CHECK(result.find(ModelTag::M2, 10) != nullptr);
        CHECK(result.find(ModelTag::M2, 11) == nullptr);
    }

    TEST_CASE("thread count never changes the output")
    {
        auto c = small_sweep();
        const auto one = run_sweep(c);
        c.threads = 4;
        const auto four = run_sweep(c);
        CHECK(rows_csv_text(one.rows) == rows_csv_text(four.rows));
        CHECK(aggregate_csv_text(one.aggregates) == aggregate_csv_text(four.aggregates));
        CHECK(metadata_json_text(small_sweep(), one) == metadata_json_text(c, four));
    }

    TEST_CASE("adding replicates leaves existing rows unchanged")
    {
        auto c = small_sweep();
        c.emitter_counts = {3};
        const auto two = run_sweep(c);
        c.replicates = 3;
        const auto three = run_sweep(c);
        REQUIRE(three.rows.size() == 6);
        CHECK(three.rows[0].l_pew_um == two.rows[0].l_pew_um);
        CHECK(three.rows[1].l_pew_um == two.rows[1].l_pew_um);
        CHECK(three.rows[3].l_pew_um == two.rows[2].l_pew_um);
    }

    TEST_CASE("replicate seeds are distinct across cells")
    {
        std::vector<std::uint64_t> seeds;
        for (ModelTag model : {ModelTag::M1, ModelTag::M2})
            for (Index n : {1, 10, 100})
                for (int rep = 0; rep < 8; ++rep)
                    seeds.push_back(replicate_seed(42, model, n, rep));
        std::sort(seeds.begin(), seeds.end());
        CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
    }

    TEST_CASE("invalid configuration lists every problem")
    {
        SweepConfig c;
        c.replicates = 0;
        c.emitter_counts = {0};
        c.max_lag_steps = c.grid.n_samples;
        CHECK(c.violations().size() >= 3);
        CHECK_THROWS_AS(run_sweep(c), std::invalid_argument);
    }
}

TEST_SUITE("results io")
{
    TEST_CASE("empty sweep writes header-only CSVs")
    {
        const auto dir = scratch_dir("empty");
        SweepResult empty;
        write_results(empty, small_sweep(), SweepPaths::in_directory(dir));
        const auto rows = read_text_file(dir / "sweep_rows.csv");
        CHECK(rows ==
              "model,n_emitters,replicate,seed,l_pew_um,l_fwhm_um,fwhm_status,gamma_peak_halfwidth_fs,max_lag_fs,"
              "wall_ms\n");
        const auto agg = read_text_file(dir / "sweep_aggregate.csv");
        CHECK(std::count(agg.begin(), agg.end(), '\n') == 1);
        CHECK(fs::exists(dir / "sweep_metadata.json"));
    }

    TEST_CASE("rerun is byte-identical and aggregates recompute from the row CSV")
    {
        const auto c = small_sweep();
        const auto dir_a = scratch_dir("a");
        const auto dir_b = scratch_dir("b");
        write_results(run_sweep(c), c, SweepPaths::in_directory(dir_a));
        write_results(run_sweep(c), c, SweepPaths::in_directory(dir_b));
        for (const char* name : {"sweep_rows.csv", "sweep_aggregate.csv", "sweep_metadata.json"})
            CHECK(read_text_file(dir_a / name) == read_text_file(dir_b / name));

        const auto rows_text = read_text_file(dir_a / "sweep_rows.csv");
        const auto parsed = parse_rows_csv(rows_text);
        REQUIRE(parsed.size() == 16);
        CHECK(rows_csv_text(parsed) == rows_text);
        CHECK(aggregate_csv_text(aggregate(parsed)) == read_text_file(dir_a / "sweep_aggregate.csv"));
    }

    TEST_CASE("ill-defined FWHM is written as a token")
    {
        std::vector<ResultRow> rows{row_with(3.0, FwhmStatus::MultiCrossing)};
        const auto text = rows_csv_text(rows);
        CHECK(text.find("ILL_DEFINED,MULTI_CROSSING") != std::string::npos);
    }

    TEST_CASE("write failure names the path")
    {
        const auto dir = scratch_dir("blocked");
        fs::create_directories(dir);
        write_text_file(dir / "file", "x");
        const auto paths = SweepPaths::in_directory(dir / "file" / "sub");
        try {
            write_results(SweepResult{}, small_sweep(), paths);
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find((dir / "file").string()) != std::string::npos);
        }
    }
}

TEST_SUITE("stationarity")
{
    TEST_CASE("pure sine segments share variance and gamma")
    {
        M1Params p;
        p.jump_rate = 0.0;
        p.sigma_period_fs = 0.0;
        p.sigma_amplitude = 0.0;
        const auto sig = generate_superposition(p, 1, SimulationGrid{}, 1);
        const auto report = stationarity_diagnostic(sig, 4);
        REQUIRE(report.segment_variance.size() == 4);
        CHECK(report.variance_dispersion() < 0.01);
        CHECK(report.max_gamma_discrepancy < 1e-3);
    }

    TEST_CASE("sparse M2 pulses localize energy")
    {
        M2Params p;
        p.emission_rate = 1e-5;
        const auto sig = generate_superposition(p, 1, SimulationGrid{}, 4);
        CHECK(stationarity_diagnostic(sig, 8).variance_ratio() > 2.0);
    }

    TEST_CASE("M1 with many emitters is statistically stationary")
    {
        const auto sig = generate_superposition(M1Params{}, 10'000, SimulationGrid{}, 6);
        const auto report = stationarity_diagnostic(sig, 4);
        CHECK(report.variance_dispersion() < 0.1);
    }

    TEST_CASE("segments shorter than 10 periods are refused")
    {
        SimulationGrid grid;
        grid.n_samples = 1'000;  // 40 fs
        const auto sig = generate_superposition(M1Params{}, 1, grid, 1);
        CHECK_THROWS_AS(stationarity_diagnostic(sig, 4), std::invalid_argument);
        CHECK_NOTHROW(stationarity_diagnostic(sig, 2));
    }
}

TEST_CASE("M1 at ten emitters: FWHM is ill-defined for most seeds")
{
    int ill = 0;
    for (int rep = 0; rep < 5; ++rep) {
        const auto r = run_point(M1Params{}, 10, SimulationGrid{}, replicate_seed(42, ModelTag::M1, 10, rep), 20'000);
        ill += r.fwhm_status != FwhmStatus::Ok ? 1 : 0;
    }
    CHECK(ill >= 3);
}
