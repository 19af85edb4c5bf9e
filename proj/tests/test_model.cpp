#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fnn/model.hpp"
#include "support.hpp"

using namespace fnn;

TEST_SUITE_BEGIN("model");

namespace {

ArchitectureSpec mnist_like_spec(InterConnectivity inter, Eigen::Index input_side = 28) {
  ArchitectureSpec spec;
  spec.input_size = input_side * input_side;
  spec.input_geometry = {input_side, input_side};
  if (inter == InterConnectivity::tree) {
    spec.layer_sizes = {14 * 14, 7 * 7, 10};
    spec.layer_geometry = {{14, 14}, {7, 7}, {}};
  } else {
    spec.layer_sizes = {13 * 13, 6 * 6, 10};
    spec.layer_geometry = {{13, 13}, {6, 6}, {}};
  }
  spec.intra_connectivity = {IntraConnectivity::none, IntraConnectivity::none,
                             IntraConnectivity::full};
  spec.inter_connectivity = {inter, inter, InterConnectivity::full};
  return spec;
}

ArchitectureSpec small_spec() {
  ArchitectureSpec spec;
  spec.input_size = 6;
  spec.layer_sizes = {4, 3};
  spec.intra_connectivity = {IntraConnectivity::full, IntraConnectivity::full};
  spec.inter_connectivity = {InterConnectivity::full, InterConnectivity::full};
  return spec;
}

}  // namespace

TEST_CASE("tree windows are disjoint 2x2 blocks") {
  const auto spec = mnist_like_spec(InterConnectivity::tree);
  const auto mask = inter_mask(spec.input_geometry, spec.input_size, spec.layer_geometry[0],
                               spec.layer_sizes[0], InterConnectivity::tree);
  // every downstream site has exactly 4 partners; partners never shared
  Eigen::VectorXi used = Eigen::VectorXi::Zero(spec.input_size);
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    int count = 0;
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      if (mask(i, j)) {
        ++count;
        used[i] += 1;
      }
    CHECK(count == 4);
  }
  CHECK(used.maxCoeff() == 1);
  CHECK(used.minCoeff() == 1);
  // window of downstream (x, y) = (3, 5): upstream {6,7}×{10,11}
  const Eigen::Index col = 5 * 14 + 3;
  for (Eigen::Index py : {10, 11})
    for (Eigen::Index px : {6, 7}) CHECK(mask(py * 28 + px, col));
}

TEST_CASE("overlapping windows have 16 then 9 partners") {
  const auto spec = mnist_like_spec(InterConnectivity::overlapping);
  const auto m01 = inter_mask(spec.input_geometry, spec.input_size, spec.layer_geometry[0],
                              spec.layer_sizes[0], InterConnectivity::overlapping);
  for (Eigen::Index j = 0; j < m01.cols(); ++j) {
    int count = 0;
    for (Eigen::Index i = 0; i < m01.rows(); ++i) count += m01(i, j) ? 1 : 0;
    CHECK(count == 16);  // 28 = 2·13 + 2: 4-wide windows, never clipped
  }
  const auto m12 = inter_mask(spec.layer_geometry[0], spec.layer_sizes[0], spec.layer_geometry[1],
                              spec.layer_sizes[1], InterConnectivity::overlapping);
  for (Eigen::Index j = 0; j < m12.cols(); ++j) {
    int count = 0;
    for (Eigen::Index i = 0; i < m12.rows(); ++i) count += m12(i, j) ? 1 : 0;
    CHECK(count == 9);  // 13 = 2·6 + 1: 3-wide windows
  }
}

TEST_CASE("intra masks follow the layer geometry") {
  LayerGeometry geom{4, 3};
  const auto none = intra_mask(geom, 12, IntraConnectivity::none);
  CHECK(none.cast<int>().sum() == 12);  // diagonal only
  const auto nn = intra_mask(geom, 12, IntraConnectivity::nearest);
  // interior site (1,1) = index 5: partners 4, 6, 1, 9 (+ diagonal)
  CHECK(nn(4, 5));
  CHECK(nn(6, 5));
  CHECK(nn(1, 5));
  CHECK(nn(9, 5));
  CHECK(!nn(0, 5));
  const auto nnn = intra_mask(geom, 12, IntraConnectivity::next_nearest);
  CHECK(nnn(0, 5));  // diagonal neighbor now allowed
  CHECK(!nnn(3, 5)); // (3,0) is two columns away
  const auto full = intra_mask(geom, 12, IntraConnectivity::full);
  CHECK(full.cast<int>().sum() == 144);
  // 1D fallback (no geometry)
  const auto chain = intra_mask(LayerGeometry{}, 5, IntraConnectivity::nearest);
  CHECK(chain(0, 1));
  CHECK(!chain(0, 2));
}

TEST_CASE("initialization is deterministic, masked, Hermitian, and fan-in scaled") {
  const auto spec = mnist_like_spec(InterConnectivity::tree);
  const auto a = init_parameters(spec, 42);
  const auto b = init_parameters(spec, 42);
  const auto c = init_parameters(spec, 43);
  CHECK((a.inter[0] - b.inter[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.intra[2] - b.intra[2]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.inter[0] - c.inter[0]).cwiseAbs().maxCoeff() > 0.0);
  CHECK_NOTHROW(a.validate());

  // fan-in scale: tree layer has 4 partners per column → E|t|² = 1/4;
  // the 784-entry column sample keeps the mean within 25% of it.
  const auto& t = a.inter[0];
  double mean_sq = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t(i, j) != cxd(0.0, 0.0)) {
        mean_sq += std::norm(t(i, j));
        ++n;
      }
  mean_sq /= n;
  CHECK(n == 784);
  CHECK(mean_sq == doctest::Approx(0.25).epsilon(0.25));

  // fully connected final block: fan-in 49 from the 7×7 layer
  double mean_sq2 = 0.0;
  for (Eigen::Index i = 0; i < a.inter[2].rows(); ++i)
    for (Eigen::Index j = 0; j < a.inter[2].cols(); ++j) mean_sq2 += std::norm(a.inter[2](i, j));
  mean_sq2 /= static_cast<double>(a.inter[2].size());
  CHECK(mean_sq2 == doctest::Approx(1.0 / 49.0).epsilon(0.3));
}

TEST_CASE("assemble onsite stacks the input below the trainable layers") {
  const auto spec = small_spec();
  const auto params = init_parameters(spec, 7);
  std::mt19937_64 rng(3);
  const MatC h0 = test::random_hermitian(6, rng);
  const auto sys = assemble(params, InputEncoding::onsite_dense(h0));
  CHECK(sys.layer_sizes == std::vector<Eigen::Index>{6, 4, 3});
  CHECK((sys.intra[0] - h0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sys.intra[1] - params.intra[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sys.inter[0] - params.inter[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK_NOTHROW(sys.validate());

  VecR diag(6);
  diag << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  const auto sys2 = assemble(params, InputEncoding::onsite_diagonal(diag));
  CHECK(sys2.layer0_diagonal);
  CHECK(sys2.intra0_diag.real().isApprox(diag));
  CHECK_NOTHROW(sys2.validate());

  VecR wrong(5);
  wrong.setZero();
  CHECK_THROWS_AS(assemble(params, InputEncoding::onsite_diagonal(wrong)), shape_error);
}

TEST_CASE("assemble external folds intensities into a fixed surface") {
  const auto spec = small_spec();
  const auto params = init_parameters(spec, 9);
  VecR x(6);
  x << 0.0, 0.1, 0.2, 0.3, 0.4, 0.5;
  const auto sys = assemble(params, InputEncoding::external(x));
  CHECK(sys.layer_sizes == std::vector<Eigen::Index>{4, 3});
  CHECK(sys.has_surface);
  CHECK(sys.surface_g00.size() == 6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(sys.surface_g00[i].real() == 0.0);
    CHECK(sys.surface_g00[i].imag() == doctest::Approx(-kPi * x[i]).epsilon(1e-15));
  }
  CHECK((sys.surface_coupling - params.inter[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK_NOTHROW(sys.validate());

  VecR neg(6);
  neg << -0.1, 0, 0, 0, 0, 0;
  CHECK_THROWS_AS(InputEncoding::external(neg), shape_error);
}

TEST_CASE("assemble interacting carries self-energies into layer 0") {
  const auto spec = small_spec();
  const auto params = init_parameters(spec, 11);
  std::mt19937_64 rng(5);
  const MatC h0 = test::random_hermitian(6, rng);
  std::vector<VecC> sigma(3, VecC::Constant(6, cxd(0.1, -0.2)));
  const auto sys = assemble(params, InputEncoding::interacting(h0, 2.0), &sigma);
  CHECK(sys.onsite_self_energy.size() == 3);
  CHECK_NOTHROW(sys.validate());
  CHECK_THROWS_AS(assemble(params, InputEncoding::onsite_dense(h0), &sigma), shape_error);
}

TEST_CASE("checkpoint round-trips exactly and atomically") {
  const auto spec = mnist_like_spec(InterConnectivity::overlapping);
  auto params = init_parameters(spec, 123);
  params.cc_scale = 0.0625;
  const auto dir = std::filesystem::temp_directory_path() / "fnn_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.fnn").string();
  save_checkpoint(params, path);
  CHECK(!std::filesystem::exists(path + ".tmp"));

  const auto loaded = load_checkpoint(path);
  CHECK(loaded.cc_scale == params.cc_scale);
  CHECK(loaded.spec.input_size == params.spec.input_size);
  REQUIRE(loaded.intra.size() == params.intra.size());
  for (std::size_t k = 0; k < params.intra.size(); ++k) {
    CHECK((loaded.intra[k] - params.intra[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.inter[k] - params.inter[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.intra_masks[k] == params.intra_masks[k]);
    CHECK(loaded.inter_masks[k] == params.inter_masks[k]);
  }

  // a second save of the loaded model is byte-identical
  const std::string path2 = (dir / "model2.fnn").string();
  save_checkpoint(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  // corruption is rejected
  std::ofstream bad((dir / "bad.fnn").string(), std::ios::binary);
  bad.write("FNNX", 4);
  bad.close();
  CHECK_THROWS_AS(load_checkpoint((dir / "bad.fnn").string()), format_error);
  std::ofstream trunc((dir / "trunc.fnn").string(), std::ios::binary);
  trunc.write(b1.data(), static_cast<std::streamsize>(b1.size() / 2));
  trunc.close();
  CHECK_THROWS_AS(load_checkpoint((dir / "trunc.fnn").string()), format_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("spec validation rejects inconsistent shapes") {
  auto spec = small_spec();
  spec.inter_connectivity.pop_back();
  CHECK_THROWS_AS(spec.validate(), shape_error);
  auto spec2 = small_spec();
  spec2.input_geometry = {2, 2};  // 4 != 6
  CHECK_THROWS_AS(spec2.validate(), shape_error);
  auto spec3 = mnist_like_spec(InterConnectivity::tree);
  spec3.layer_sizes[0] = 100;  // tree ratio broken (geometry mismatch first)
  CHECK_THROWS_AS(init_parameters(spec3, 1), shape_error);
}

TEST_SUITE_END();
