#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "texpup/core/adam.hpp"
#include "texpup/core/checkpoint.hpp"
#include "texpup/core/config.hpp"
#include "texpup/core/fourier.hpp"
#include "texpup/core/gradcheck.hpp"
#include "texpup/core/params.hpp"
#include "texpup/core/rng.hpp"
#include "texpup/core/tape.hpp"
#include "texpup/net/vca.hpp"

using namespace texpup;

TEST_CASE("fourier encoding basics") {
  SECTION("zero input: sines 0, cosines 1") {
    auto v = fourier_encode({0.0, 0.0}, 2);
    REQUIRE(v.size() == 8);
    for (std::size_t i = 0; i < v.size(); i += 2) {
      CHECK(v[i] == 0.0);
      CHECK(v[i + 1] == 1.0);
    }
  }
  SECTION("p = 0.5, one band") {
    auto v = fourier_encode({0.5}, 1);
    REQUIRE(v.size() == 2);
    CHECK(v[0] == Catch::Approx(1.0).margin(1e-15));
    CHECK(v[1] == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("matches a scalar-loop oracle") {
    Rng rng(3);
    std::vector<double> p = {rng.uniform(-2, 2), rng.uniform(-2, 2),
                             rng.uniform(-2, 2)};
    int bands = 4;
    auto v = fourier_encode(p, bands);
    REQUIRE(v.size() == fourier_dim(p.size(), bands));
    std::size_t at = 0;
    for (double x : p)
      for (int b = 0; b < bands; ++b) {
        double arg = std::pow(2.0, b) * M_PI * x;
        CHECK(std::fabs(v[at++] - std::sin(arg)) < 1e-12);
        CHECK(std::fabs(v[at++] - std::cos(arg)) < 1e-12);
      }
  }
  SECTION("non-finite input rejected") {
    CHECK_THROWS(fourier_encode({std::nan("")}, 2));
  }
}

TEST_CASE("grad_check on an exact quadratic") {
  ParamSet ps;
  Tensor theta({1, 2});
  theta[0] = 1.0;
  theta[1] = 2.0;
  ps.add("theta", theta);
  LossFn loss = [](const ParamSet& p, ParamSet* g) {
    const Tensor& th = p.at("theta");
    if (g) {
      g->at("theta")[0] = 2.0 * th[0];
      g->at("theta")[1] = 2.0 * th[1];
    }
    return th[0] * th[0] + th[1] * th[1];
  };
  CHECK(grad_check(loss, ps, 1e-5) < 1e-8);
}

namespace {

// Exercises most tape ops in one composite scalar function.
double composite_loss(const ParamSet& p, ParamSet* g) {
  Tape t(&p);
  Var a = t.param("a");        // [3 x 4]
  Var b = t.param("b");        // [4 x 2]
  Var bias = t.param("bias");  // [1 x 2]
  Var m = t.add_bias(t.matmul(a, b), bias);       // [3 x 2]
  Var r = t.relu(m);
  Var s = t.sigmoid(t.scale(m, 0.5));
  Var cat = t.concat_cols(r, s);                  // [3 x 4]
  Var sl = t.slice_cols(cat, 1, 3);               // [3 x 2]
  Var sm = t.softmax_rows(sl);
  Var gathered = t.gather_rows(sm, {2, 0, 1, 2}); // [4 x 2]
  Var gs = t.group_sum(t.mul(gathered, gathered), 2);  // [2 x 2]
  Var e = t.exp_(t.scale(gs, -1.0));
  Var q = t.sqrt_(t.add(e, t.constant(Tensor::full({2, 2}, 0.1))));
  Var tr = t.transpose(q);
  Var total = t.add(t.mean(tr), t.sum(t.mean_rows(sm)));
  double v = t.val(total).item();
  if (g) {
    t.backward(total);
    t.add_param_grads(*g);
  }
  return v;
}

}  // namespace

TEST_CASE("tape gradients match finite differences on a composite graph") {
  Rng rng(11);
  ParamSet ps;
  ps.add("a", init_weight({3, 4}, 4, rng));
  ps.add("b", init_weight({4, 2}, 4, rng));
  ps.add("bias", init_weight({1, 2}, 2, rng));
  CHECK(grad_check(composite_loss, ps, 1e-6) < 1e-6);
}

TEST_CASE("conv and batch-norm gradients") {
  Rng rng(5);
  ParamSet ps;
  ps.add("w", init_weight({3, 2 * 9}, 18, rng));
  ps.add("bias", Tensor({1, 3}));
  ps.add("gamma", Tensor::full({1, 3}, 1.0));
  ps.add("beta", Tensor({1, 3}));
  Tensor img({5 * 4, 2});
  Rng irng(6);
  for (double& v : img.data) v = irng.uniform(-1, 1);

  LossFn loss = [&img](const ParamSet& p, ParamSet* g) {
    Tape t(&p);
    Var x = t.constant(img);
    Var c = t.conv3x3(x, 5, 4, t.param("w"), t.param("bias"), 2);
    Var bn = t.batchnorm_train(c, t.param("gamma"), t.param("beta"), 1e-5);
    Var out = t.sum(t.mul(t.relu(bn), t.sigmoid(c)));
    double v = t.val(out).item();
    if (g) {
      t.backward(out);
      t.add_param_grads(*g);
    }
    return v;
  };
  CHECK(grad_check(loss, ps, 1e-6) < 1e-6);
}

TEST_CASE("bce-with-logits matches a scalar oracle and its gradient") {
  Rng rng(7);
  ParamSet ps;
  ps.add("logits", init_weight({6, 1}, 1, rng));
  Tensor gt({6, 1});
  for (std::size_t i = 0; i < 6; ++i) gt[i] = i % 2;

  double expected = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    double x = ps.at("logits")[i];
    double p = 1.0 / (1.0 + std::exp(-x));
    expected += -(gt[i] * std::log(p) + (1 - gt[i]) * std::log(1 - p));
  }
  expected /= 6.0;

  LossFn loss = [&gt](const ParamSet& p, ParamSet* g) {
    Tape t(&p);
    Var l = t.bce_logits_mean(t.param("logits"), gt);
    double v = t.val(l).item();
    if (g) {
      t.backward(l);
      t.add_param_grads(*g);
    }
    return v;
  };
  ParamSet gr = ParamSet::zeros_like(ps);
  CHECK(std::fabs(loss(ps, &gr) - expected) < 1e-12);
  CHECK(grad_check(loss, ps, 1e-6) < 1e-7);
}

TEST_CASE("vca renderer: permutation and tie-break semantics") {
  ModelConfig cfg;
  net::VcaSpec spec{"r", 4, 6, 5, 8, 3, 2, 10.0, {{"out", 2, false}}};
  Rng rng(13);
  ParamSet ps;
  net::add_vca_params(ps, spec, rng);

  std::vector<net::Vector2d> anchors = {{1.0, 1.0}, {4.0, 2.0}, {2.0, 7.0},
                                        {8.0, 8.0}, {0.0, 5.0}};
  Tensor feats({5, 4});
  Rng frng(14);
  for (double& v : feats.data) v = frng.uniform(-1, 1);
  Tensor global({1, 6});
  for (double& v : global.data) v = frng.uniform(-1, 1);
  std::vector<net::Vector2d> queries = {{2.0, 2.0}, {6.5, 7.0}};

  auto render = [&](const std::vector<net::Vector2d>& a, const Tensor& f,
                    int k) {
    net::VcaSpec s = spec;
    s.neighbors = k;
    Tape t(&ps);
    auto out = net::vca_render(t, s, a, t.constant(f), t.constant(global),
                               queries);
    return t.val(out.heads[0]);
  };

  Tensor base = render(anchors, feats, 2);

  SECTION("permuting anchors+features leaves output unchanged") {
    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    std::vector<net::Vector2d> pa(5);
    Tensor pf({5, 4});
    for (std::size_t i = 0; i < 5; ++i) {
      pa[i] = anchors[perm[i]];
      for (std::size_t j = 0; j < 4; ++j) pf.at2(i, j) = feats.at2(perm[i], j);
    }
    Tensor permuted = render(pa, pf, 2);
    for (std::size_t i = 0; i < base.size(); ++i)
      CHECK(std::fabs(base[i] - permuted[i]) < 1e-12);
    Tensor all_base = render(anchors, feats, 5);
    Tensor all_perm = render(pa, pf, 5);
    for (std::size_t i = 0; i < all_base.size(); ++i)
      CHECK(std::fabs(all_base[i] - all_perm[i]) < 1e-12);
  }

  SECTION("duplicate anchor at the query, k=1: lowest index wins") {
    std::vector<net::Vector2d> dup = {queries[0], queries[0]};
    Tensor dfeats({2, 4});
    for (std::size_t j = 0; j < 4; ++j) {
      dfeats.at2(0, j) = feats.at2(0, j);
      dfeats.at2(1, j) = feats.at2(1, j);  // different row, same position
    }
    auto idx = net::nearest_anchors(dup, queries[0], 1);
    REQUIRE(idx == std::vector<std::size_t>{0});

    Tensor two = render(dup, dfeats, 1);
    std::vector<net::Vector2d> solo = {queries[0]};
    Tensor sf({1, 4});
    for (std::size_t j = 0; j < 4; ++j) sf.at2(0, j) = feats.at2(0, j);
    Tensor one = render(solo, sf, 1);
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(std::fabs(two.at2(0, j) - one.at2(0, j)) < 1e-12);
  }

  SECTION("fewer anchors than neighbors rejected") {
    CHECK_THROWS(render({{0.0, 0.0}}, Tensor({1, 4}), 2));
  }
}

TEST_CASE("rng determinism and fork independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.uniform() == b.uniform());
  Rng f1 = Rng(42).fork(1), f2 = Rng(42).fork(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += f1.below(1000) == f2.below(1000);
  CHECK(same < 10);

  Rng n(9);
  double mean = 0, var = 0;
  const int N = 20000;
  std::vector<double> xs(N);
  for (double& x : xs) x = n.normal();
  for (double x : xs) mean += x;
  mean /= N;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= N;
  CHECK(std::fabs(mean) < 0.05);
  CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("model config invariants") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  ModelConfig bad = c;
  bad.vca_neighbors = bad.keypoints + 1;
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.image_w = 4;
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.d_f = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "texpup_ckpt_test";
  fs::create_directories(dir);

  Rng rng(21);
  Checkpoint ck;
  ck.config = ModelConfig{};
  ck.extra = {{"stage", "test"}};
  ck.params.add("g1.w", init_weight({4, 3}, 3, rng));
  ck.params.add("g2.w", init_weight({2, 5}, 5, rng));
  // On-disk payload is f32: round to f32 so save->load->save is stable.
  for (auto& [name, t] : ck.params)
    for (double& v : t.data) v = static_cast<float>(v);

  std::string p1 = (dir / "a.ckpt").string(), p2 = (dir / "b.ckpt").string();
  ck.save(p1);
  Checkpoint re = Checkpoint::load(p1);
  re.save(p2);

  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  };
  CHECK(slurp(p1) == slurp(p2));
  CHECK(re.params.hash() == ck.params.hash());
  fs::remove_all(dir);
}

TEST_CASE("param hashing isolates groups") {
  Rng rng(31);
  ParamSet ps;
  ps.add("geom.w", init_weight({2, 2}, 2, rng));
  ps.add("tex.w", init_weight({2, 2}, 2, rng));
  std::uint64_t g0 = ps.hash_group("geom.");
  ps.at("tex.w")[0] += 1.0;
  CHECK(ps.hash_group("geom.") == g0);
  CHECK(ps.hash_group("tex.") != g0);
  ps.at("geom.w")[0] += 1.0;
  CHECK(ps.hash_group("geom.") != g0);
}

TEST_CASE("adam over a parameter subset leaves the rest untouched") {
  Rng rng(33);
  ParamSet ps;
  ps.add("frozen.w", init_weight({2, 2}, 2, rng));
  ps.add("live.w", init_weight({2, 2}, 2, rng));
  Tensor frozen_before = ps.at("frozen.w");

  ParamSet sub;
  sub.add("live.w", ps.at("live.w"));
  Adam opt(sub);
  ParamSet grads = ParamSet::zeros_like(sub);
  for (double& g : grads.at("live.w").data) g = 1.0;
  opt.step(ps, grads, 1e-2);

  for (std::size_t i = 0; i < 4; ++i)
    CHECK(ps.at("frozen.w")[i] == frozen_before[i]);
  CHECK(ps.at("live.w")[0] != sub.at("live.w")[0]);
}
