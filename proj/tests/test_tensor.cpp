#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hgv/errors.hpp"
#include "hgv/tensor.hpp"

using namespace hgv;
using namespace hgv::tensor;

TEST_CASE("construction and shape invariants") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.at(1, 2) == 1.5);
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(shape_str({2, 3}) == "[2,3]");
  CHECK_THROWS_AS(Tensor({2, 0}), StructuralError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), StructuralError);
  CHECK_FALSE(Tensor().defined());
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(Tensor::vector({1, 2}).item(), StructuralError);
  CHECK(Tensor::identity(3).at(2, 2) == 1.0);
  CHECK(Tensor::identity(3).at(0, 2) == 0.0);
  CHECK(Tensor::from_rows({{1, 2}, {3, 4}}).at(1, 0) == 3.0);
  CHECK_THROWS_AS(Tensor::from_rows({{1, 2}, {3}}), StructuralError);
}

TEST_CASE("reshape keeps row-major order") {
  Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  Tensor r = t.reshaped({3, 2});
  CHECK(r.at(1, 0) == 3.0);
  CHECK_THROWS_AS(t.reshaped({4, 2}), StructuralError);
}

TEST_CASE("accumulation treats undefined as zero") {
  Tensor acc;
  acc += Tensor::vector({1, 2});
  acc += Tensor::vector({1, 2});
  CHECK(acc == Tensor::vector({2, 4}));
  CHECK_THROWS_AS(acc += Tensor::vector({1}), StructuralError);
  CHECK_FALSE(Tensor::vector({1, NAN}).all_finite());
}

TEST_CASE("parameter store") {
  ParamStore store;
  auto& p = store.add("a/W", Tensor({2, 2}, 1.0));
  store.add("b", Tensor({3}));
  CHECK(p.grad.shape() == p.value.shape());
  CHECK(store.size() == 2);
  CHECK(store.total_numel() == 7);
  CHECK(store.contains("a/W"));
  CHECK_THROWS_AS(store.add("a/W", Tensor({1})), StructuralError);
  CHECK_THROWS_AS(store.get("missing"), LookupError);

  ParamStore copy = store;
  copy.get("a/W").value.fill(9.0);
  CHECK(store.get("a/W").value.at(0, 0) == 1.0);
  CHECK(copy.all()[0]->name == "a/W");

  p.grad.fill(3.0);
  store.zero_grad();
  CHECK(p.grad == Tensor({2, 2}));
}

TEST_CASE("seeded initialization") {
  CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
  Tensor a = uniform_init({4, 5}, 0.25, 7, "w");
  CHECK(a == uniform_init({4, 5}, 0.25, 7, "w"));
  CHECK_FALSE(a == uniform_init({4, 5}, 0.25, 7, "v"));
  for (double v : a.values()) CHECK(std::abs(v) <= 0.25);
}
