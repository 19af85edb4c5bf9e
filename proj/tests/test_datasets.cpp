#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "fnn/datasets.hpp"

using namespace fnn;

TEST_SUITE_BEGIN("datasets");

#ifndef FNN_TEST_DATA_DIR
#define FNN_TEST_DATA_DIR "data"
#endif

TEST_CASE("mnist loader reproduces the canonical corpus") {
  const std::string dir = std::string(FNN_TEST_DATA_DIR) + "/mnist";
  const auto train = load_mnist_dir(dir, true);
  REQUIRE(train.size() == 60000);
  CHECK(train[0].width == 28);
  CHECK(train[0].height == 28);
  // first ten labels of the canonical training split
  const int expect[10] = {5, 0, 4, 1, 9, 2, 1, 3, 1, 4};
  for (int i = 0; i < 10; ++i) CHECK(train[i].label == expect[i]);
  CHECK(train[0].pixels.size() == 784);
  CHECK(train[0].pixels.minCoeff() >= 0.0);
  CHECK(train[0].pixels.maxCoeff() <= 1.0);
  CHECK(train[0].pixels.mean() == doctest::Approx(0.13768007202881152).epsilon(1e-14));
  CHECK(train[0].pixels[152] == doctest::Approx(0.011764705882352941).epsilon(1e-14));

  const auto test = load_mnist_dir(dir, false);
  REQUIRE(test.size() == 10000);
  const int expect_t[10] = {7, 2, 1, 0, 4, 1, 4, 9, 5, 9};
  for (int i = 0; i < 10; ++i) CHECK(test[i].label == expect_t[i]);

  CHECK_THROWS_AS(load_mnist(dir + "/missing.gz", dir + "/missing2.gz"), format_error);
}

TEST_CASE("2x2 pooling averages blocks") {
  ImageSample s;
  s.width = s.height = 4;
  s.label = 3;
  s.pixels.resize(16);
  for (int i = 0; i < 16; ++i) s.pixels[i] = i / 16.0;
  const ImageSample d = downsample_2x2(s);
  CHECK(d.width == 2);
  CHECK(d.height == 2);
  CHECK(d.label == 3);
  // block (0,0): pixels {0,1,4,5}/16 -> mean 10/64
  CHECK(d.pixels[0] == doctest::Approx((0 + 1 + 4 + 5) / 64.0).epsilon(1e-14));
  CHECK(d.pixels[3] == doctest::Approx((10 + 11 + 14 + 15) / 64.0).epsilon(1e-14));

  ImageSample odd;
  odd.width = odd.height = 3;
  odd.pixels = VecR::Zero(9);
  CHECK_THROWS_AS(downsample_2x2(odd), shape_error);
}

TEST_CASE("image encodings map pixels to the input layer") {
  ImageSample s;
  s.width = 2;
  s.height = 1;
  s.pixels.resize(2);
  s.pixels << 0.25, -0.5;  // crafted negative to exercise the clip
  const auto onsite = encode_image_onsite(s, 2.0);
  CHECK(onsite.variant == InputEncoding::Variant::onsite);
  CHECK(onsite.diagonal);
  CHECK(onsite.onsite_diag[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(onsite.onsite_diag[1] == doctest::Approx(-1.0).epsilon(1e-14));
  const auto ext = encode_image_external(s);
  CHECK(ext.variant == InputEncoding::Variant::external_ldos);
  CHECK(ext.ldos_values[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(ext.ldos_values[1] == 0.0);
}

TEST_CASE("two-band lattice: hermiticity, gap law, and marker quantization") {
  for (double kappa : {0.3, 0.9}) {
    const MatC h = chern_hamiltonian(kappa, 12);
    REQUIRE(h.rows() == 144);
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    const auto marker = kubo_chern(h, 12);
    // clean dispersion closes linearly at the transition: gap = 8|κ − 1/2|
    CHECK(marker.gap == doctest::Approx(8.0 * std::abs(kappa - 0.5)).epsilon(1e-9));
  }
  const auto topo = kubo_chern(chern_hamiltonian(0.9, 12), 12);
  CHECK(topo.c == doctest::Approx(1.0).epsilon(0.05));
  const auto trivial = kubo_chern(chern_hamiltonian(0.1, 12), 12);
  CHECK(std::abs(trivial.c) < 0.05);
  // frozen calibration values (deterministic eigensolve)
  CHECK(topo.c == doctest::Approx(1.00127491).epsilon(1e-4));
  CHECK(trivial.c == doctest::Approx(0.00063390).epsilon(1e-2));
  // the gapped clean points stay within 0.05 of the uncut sum (cutoff sanity)
  const double side = static_cast<double>(12 * 12) * 10.0;
  CHECK(std::abs(kubo_chern(chern_hamiltonian(0.7, 12), 12, side).c - 0.976070572452) < 0.05);
  CHECK(std::abs(kubo_chern(chern_hamiltonian(0.3, 12), 12, side).c - 0.019997182815) < 0.05);

  CHECK_THROWS_AS(chern_hamiltonian(0.5, 11), shape_error);
  CHECK_THROWS_AS(kubo_chern(MatC::Zero(10, 10), 12), shape_error);
}

TEST_CASE("disorder is deterministic, hermitian, and bounded") {
  const MatC h = chern_hamiltonian(0.9, 8);
  const MatC a = add_disorder(h, 2.0, 1.0, 0.5, 8, 42);
  const MatC b = add_disorder(h, 2.0, 1.0, 0.5, 8, 42);
  const MatC c = add_disorder(h, 2.0, 1.0, 0.5, 8, 43);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  CHECK((a - a.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(((a - h).diagonal().real().cwiseAbs().maxCoeff()) <= 2.0);
  CHECK((a - h).diagonal().imag().cwiseAbs().maxCoeff() == 0.0);
  // only the onsite terms change when bond strengths are zero
  const MatC d = add_disorder(h, 1.5, 0.0, 0.0, 8, 7);
  MatC off = d - h;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("marker labeling applies the reject bands") {
  CHECK(label_sample({0.95, 1.0}) == 1);
  CHECK(label_sample({1.25, 1.0}) == 1);
  CHECK(label_sample({0.05, 1.0}) == 0);
  CHECK(label_sample({-0.2, 1.0}) == 0);
  CHECK(!label_sample({0.5, 1.0}).has_value());   // between the bands
  CHECK(!label_sample({1.5, 1.0}).has_value());   // beyond the topological band
  CHECK(!label_sample({0.95, 0.01}).has_value()); // gapless
}

TEST_CASE("dataset generator balances classes deterministically") {
  ChernDatasetConfig cfg;
  cfg.lattice_size = 8;
  cfg.sweep_kappa = true;
  cfg.w0_min = 0.5;
  cfg.w0_max = 1.5;
  cfg.w1_max = 0.5;
  cfg.w2_max = 0.25;
  const auto set = generate_chern_dataset(6, 12345, cfg);
  REQUIRE(set.size() == 6);
  int ones = 0;
  for (const auto& s : set) {
    ones += s.label;
    const auto relabel = label_sample(s.marker, cfg.gap_min);
    REQUIRE(relabel.has_value());
    CHECK(*relabel == s.label);
    CHECK(s.h.rows() == 64);
  }
  CHECK(ones == 3);
  const auto again = generate_chern_dataset(6, 12345, cfg);
  CHECK((set[0].h - again[0].h).cwiseAbs().maxCoeff() == 0.0);
  CHECK(set[3].kappa == again[3].kappa);
}

TEST_CASE("falicov-kimball builder pins the symmetric point") {
  FkInstance inst;
  inst.lx = 4;
  inst.ly = 4;
  inst.t = 1.0;
  inst.u = 2.0;
  inst.fkmit = true;
  // frozen checkerboard occupations make the one-body model particle-hole
  // symmetric at mu = U/2
  inst.f_occupations.resize(16);
  for (Eigen::Index y = 0; y < 4; ++y)
    for (Eigen::Index x = 0; x < 4; ++x) inst.f_occupations[y * 4 + x] = ((x + y) % 2 == 0) ? 1 : 0;
  const FkModel model = fk_build(inst);
  CHECK(model.mu == doctest::Approx(1.0));
  CHECK(model.ef == doctest::Approx(-1.0));
  CHECK(model.explicit_f);
  CHECK((model.h - model.h.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.h(0, 1).real() == doctest::Approx(-1.0));  // hopping along x
  CHECK(model.h(0, 0).real() == doctest::Approx(1.0));   // U·n_f − μ = 2·1 − 1

  Eigen::SelfAdjointEigenSolver<MatC> es(model.h);
  const VecR eps = es.eigenvalues();
  for (Eigen::Index i = 0; i < 16; ++i)
    CHECK(eps[i] == doctest::Approx(-eps[15 - i]).epsilon(1e-12));

  FkInstance bad = inst;
  bad.f_occupations.resize(4);
  CHECK_THROWS_AS(fk_build(bad), shape_error);
  bad = inst;
  bad.f_occupations[0] = 1.5;
  CHECK_THROWS_AS(fk_build(bad), shape_error);
}

TEST_CASE("sample container round-trips bit-exactly") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<StoredSample> samples(2);
  samples[0].metadata_json = "{\"kind\":\"alpha\",\"label\":1}";
  samples[0].matrix.resize(3, 2);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) samples[0].matrix(i, j) = cxd(g(rng), g(rng));
  samples[1].metadata_json = "{}";
  samples[1].matrix = MatC::Zero(1, 1);

  const std::string path = "container_test.fnnd";
  save_container(path, "{\"note\":\"round trip\"}", samples);
  const auto loaded = load_container(path);
  CHECK(loaded.manifest_json == "{\"note\":\"round trip\"}");
  REQUIRE(loaded.samples.size() == 2);
  CHECK((loaded.samples[0].matrix - samples[0].matrix).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.samples[1].matrix - samples[1].matrix).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.samples[0].metadata_json.find("\"kind\":\"alpha\"") != std::string::npos);
  CHECK(loaded.samples[0].metadata_json.find("\"rows\":3") != std::string::npos);

  // corruption: flip the magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS_AS(load_container(path), format_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_container(path), format_error);

  StoredSample bad;
  bad.metadata_json = "not json";
  bad.matrix = MatC::Zero(1, 1);
  CHECK_THROWS_AS(save_container("x.fnnd", "{}", {bad}), format_error);
}

TEST_SUITE_END();
