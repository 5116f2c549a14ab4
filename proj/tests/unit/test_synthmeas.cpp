#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "pyrotime/farr.hpp"
#include "pyrotime/firesim.hpp"
#include "pyrotime/raster_ops.hpp"
#include "pyrotime/rng.hpp"
#include "pyrotime/synthmeas.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace pyrotime;
using namespace pyrotime::synthmeas;
namespace fs = std::filesystem;

namespace {

ArrivalField numbered(int nx, int ny) {
  ArrivalField f(GridSpec{nx, ny, 60.0, 0.0, 0.0});
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) f(i, j) = j * 100 + i;
  return f;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string encode_normalized(const GridSpec& spec, const std::vector<double>& v) {
  std::vector<float> f(v.begin(), v.end());
  return encode_farr({spec, farr_units::kNormalized, 1.0}, f);
}

MeasurementParams golden_params() { return MeasurementParams{}.scaled_for(GridSpec::square(64, 60.0)); }

}  // namespace

TEST_CASE("augment identity, point symmetry and lattice rotations") {
  const ArrivalField f = numbered(16, 16);
  CHECK(augment(f, 0.0, 0.0, 0.0, 0.0) == f);

  const ArrivalField r180 = augment(f, 180.0, 0.0, 0.0, 0.0);
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) CHECK(r180(15 - i, 15 - j) == f(i, j));

  const ArrivalField r90 = augment(f, 90.0, 0.0, 0.0, 0.0);
  CHECK(augment(r90, 90.0, 0.0, 0.0, 0.0) == r180);
  CHECK(augment(augment(r180, 90.0, 0, 0, 0), 90.0, 0, 0, 0) == f);
  // Clockwise on the map: the north-west corner moves to the north-east.
  CHECK(r90(15, 0) == f(0, 0));
  CHECK(augment(f, -90.0, 0, 0, 0) == augment(f, 270.0, 0, 0, 0));

  const ArrivalField odd = numbered(9, 9);
  CHECK(augment(augment(odd, 90.0, 0, 0, 0), 90.0, 0, 0, 0) == augment(odd, 180.0, 0, 0, 0));
}

TEST_CASE("augment shifts by whole pixels and fills background") {
  const ArrivalField f = numbered(16, 16);
  const ArrivalField s = augment(f, 0.0, 130.0, -50.0, 600.0);  // 2 px east, 1 px south
  CHECK(s(5, 6) == f(3, 5));
  CHECK(is_background(s(0, 3)));
  CHECK(is_background(s(1, 3)));
  CHECK(is_background(s(7, 0)));
  CHECK_THROWS_AS(augment(f, 0.0, 400.0, 0.0, 600.0), std::invalid_argument);
  CHECK_THROWS_AS(augment(f, 0.0, 0.0, -301.0, 600.0), std::invalid_argument);
}

TEST_CASE("property: arbitrary rotations only move existing values") {
  const ArrivalField f = testing::radial_field(40);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const ArrivalField r = augment(f, rng.uniform(0.0, 360.0), 0.0, 0.0, 0.0);
    std::set<double> src(f.values().begin(), f.values().end());
    for (double v : r.values()) CHECK((is_background(v) || src.count(v) == 1));
  }
  // The center of an odd-size grid is a fixed point of rotation.
  const ArrivalField g = testing::radial_field(41);
  CHECK(augment(g, 33.0, 0, 0, 0)(20, 20) == g(20, 20));
}

TEST_CASE("measure: step-6 assignment and min combination") {
  ArrivalField f(GridSpec::square(32, 75.0));
  for (double& v : f.values()) v = 10.0;
  MeasurementParams p;
  p.mask_keep_fraction = 1.0;
  p.n_occlusions = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    MeasureTrace tr;
    const MeasureResult r = measure(f, p, seed, &tr);
    double expect = kBackground;
    for (std::size_t c = 0; c < tr.times_h.size(); ++c) {
      const double lo = std::max(tr.times_h[c] - tr.lookback_h[c], 0.0);
      if (10.0 > lo && 10.0 <= tr.times_h[c]) expect = std::min(expect, tr.times_h[c]);
    }
    for (double v : tr.coarse_measurement.values()) {
      if (is_background(expect)) {
        CHECK(is_background(v));
      } else {
        CHECK(v == expect);
      }
    }
    CHECK(r.shifted(0, 0) == 10.0 + tr.day_shift_h);
  }
}

TEST_CASE("measure matches the independent oracle, including reversed combination") {
  const ArrivalField f = testing::radial_field();
  const MeasurementParams p = golden_params();
  for (std::uint64_t seed : {1ull, 42ull, 977ull}) {
    const MeasureResult r = measure(f, p, seed);
    for (bool rev : {false, true}) {
      const auto o = testing::measure_oracle(f.data(), 64, 64, 60.0, p, seed, rev);
      CHECK(std::vector<double>(r.target.values().begin(), r.target.values().end()) == o.target);
      CHECK(std::vector<double>(r.measurement.values().begin(), r.measurement.values().end()) ==
            o.measurement);
    }
  }
}

TEST_CASE("measure golden output for seed 42") {
  const ArrivalField f = testing::radial_field();
  const MeasurementParams p = golden_params();
  const fs::path meas_path = fs::path(PYROTIME_TEST_DATA) / "measure_seed42_meas.farr";
  const fs::path target_path = fs::path(PYROTIME_TEST_DATA) / "measure_seed42_target.farr";
  const auto o = testing::measure_oracle(f.data(), 64, 64, 60.0, p, 42);
  if (std::getenv("PYROTIME_WRITE_GOLDEN")) {
    std::ofstream(meas_path, std::ios::binary) << encode_normalized(f.spec(), o.measurement);
    std::ofstream(target_path, std::ios::binary) << encode_normalized(f.spec(), o.target);
  }
  REQUIRE(fs::exists(meas_path));
  const MeasureResult r = measure(f, p, 42);
  std::vector<float> mv(r.measurement.values().begin(), r.measurement.values().end());
  std::vector<float> tv(r.target.values().begin(), r.target.values().end());
  CHECK(encode_farr({f.spec(), farr_units::kNormalized, 1.0}, mv) == slurp(meas_path));
  CHECK(encode_farr({f.spec(), farr_units::kNormalized, 1.0}, tv) == slurp(target_path));
  std::size_t set = 0;
  for (float v : mv) set += v < 1.0f;
  CHECK(set > 0);
}

TEST_CASE("property: measurement values, ordering and range") {
  const ArrivalField base = testing::radial_field(96, 60.0, 0.012, 70.0);
  const MeasurementParams p = MeasurementParams{}.scaled_for(base.spec());
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    MeasureTrace tr;
    const MeasureResult r = measure(base, p, seed, &tr);
    REQUIRE(std::is_sorted(tr.times_h.begin(), tr.times_h.end()));
    for (std::size_t k = 0; k < tr.coarse_measurement.size(); ++k) {
      const double v = tr.coarse_measurement[k];
      if (is_background(v)) continue;
      CHECK(std::find(tr.times_h.begin(), tr.times_h.end(), v) != tr.times_h.end());
      // Detection never precedes arrival on the sensor grid.
      CHECK(tr.coarse_arrival[k] <= v);
    }
    for (double v : r.measurement.values()) REQUIRE((v >= 0.0 && v <= 1.0));
    for (std::size_t k = 0; k < base.size(); ++k) {
      if (is_background(base[k])) CHECK(r.target[k] == 1.0);
      REQUIRE((r.target[k] >= 0.0 && r.target[k] <= 1.0));
    }
  }
}

TEST_CASE("knowledge mask keeps half of the in-interval pixels") {
  ArrivalField f(GridSpec::square(100, 375.0));
  Rng rng(9);
  for (double& v : f.values()) v = rng.uniform(0.0, 48.0);
  std::size_t in = 0, kept = 0;
  MeasureTrace tr;
  measure(f, MeasurementParams{}, 12345, &tr);
  for (std::size_t c = 0; c < tr.survivors.size(); ++c) {
    in += tr.interval_pixels[c];
    kept += tr.survivors[c];
  }
  REQUIRE(in > 1000);
  CHECK(static_cast<double>(kept) / in == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("measure rejects coarse inputs and bad parameters") {
  CHECK_THROWS_AS(measure(ArrivalField(GridSpec::square(16, 500.0)), MeasurementParams{}, 1),
                  std::invalid_argument);
  MeasurementParams p;
  p.mask_keep_fraction = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.lookback_hi_h = p.lookback_lo_h;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("scaled parameters follow the domain extent") {
  const GridSpec small = GridSpec::square(64, 60.0);
  CHECK(MeasurementParams{}.scaled_for(small).occlusion_size_m == doctest::Approx(375.0));
  CHECK(AugmentParams{}.scaled_for(small).translation_box_m == doctest::Approx(1125.0));
  CHECK(MeasurementParams{}.scaled_for(GridSpec::production()).occlusion_size_m == 3000.0);
  CHECK(MeasurementParams{}.scaled_for(small).sensor_resolution_m == 375.0);
  CHECK_THROWS_AS(AugmentParams{}.validate(small), std::invalid_argument);
}

TEST_CASE("validation simulations are spread round-robin") {
  CHECK(validation_sims(20, 8000, 2000) == std::vector<int>{4, 9, 14, 19});
  CHECK(validation_sims(4, 200, 50) == std::vector<int>{3});
  CHECK(validation_sims(5, 10, 0).empty());
  CHECK(validation_sims(3, 0, 10) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(validation_sims(1, 10, 10), std::invalid_argument);
}

TEST_CASE("build_dataset is deterministic and leak-free") {
  const fs::path root = fs::temp_directory_path() / "pyrotime_dataset_test";
  fs::remove_all(root);
  fs::create_directories(root / "sims");
  const GridSpec spec = GridSpec::square(32, 60.0);
  const auto configs = firesim::sample_training_configs(3, 5, spec, 48.0, 0.01);
  for (std::size_t k = 0; k < configs.size(); ++k) {
    save_arrival(root / "sims" / ("sim_" + std::to_string(k) + ".farr"),
                 firesim::solve_arrival(configs[k], firesim::RosModel{}));
  }
  AugmentParams ap = AugmentParams{}.scaled_for(spec);
  ap.samples_per_sim = 6;
  const MeasurementParams mp = MeasurementParams{}.scaled_for(spec);
  const DatasetManifest a = build_dataset(root / "sims", root / "a", ap, mp, 10, 4, 77, 1);
  const DatasetManifest b = build_dataset(root / "sims", root / "b", ap, mp, 10, 4, 77, 3);
  CHECK(a.train.size() == 10);
  CHECK(a.validation.size() == 4);
  CHECK(slurp(root / "a" / kManifestName) == slurp(root / "b" / kManifestName));
  for (const auto& r : a.train) {
    CHECK(slurp(root / "a" / r.arrival) == slurp(root / "b" / r.arrival));
    CHECK(slurp(root / "a" / r.measurement) == slurp(root / "b" / r.measurement));
    CHECK(std::find(a.validation_sims.begin(), a.validation_sims.end(), r.sim) ==
          a.validation_sims.end());
  }
  for (const auto& r : a.validation) {
    CHECK(std::find(a.validation_sims.begin(), a.validation_sims.end(), r.sim) !=
          a.validation_sims.end());
    CHECK(load_normalized(root / "a" / r.arrival).spec() == spec);
  }
  const DatasetManifest loaded = load_manifest(root / "a" / kManifestName);
  CHECK(loaded.to_json() == a.to_json());
  CHECK(loaded.root == root / "a");

  CHECK_THROWS_AS(build_dataset(root / "sims", root / "c", ap, mp, 100, 4, 77, 1),
                  std::invalid_argument);
  fs::remove_all(root);
}
