#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "advgen/csv.hpp"
#include "advgen/data.hpp"
#include "advgen/graph.hpp"
#include "advgen/rng.hpp"
#include "advgen/transforms.hpp"

using namespace advgen;

namespace {

FeatureSchema two_feature_schema() {
  FeatureSchema s;
  Feature a;
  a.name = "x1";
  a.min = -10;
  a.max = 10;
  Feature b;
  b.name = "x2";
  b.min = -10;
  b.max = 10;
  s.features = {a, b};
  s.label = LabelSpec{"label", {"0", "1"}};
  s.validate();
  return s;
}

struct TempCsv {
  std::string path;
  TempCsv(const std::string& name, const std::string& content) : path(name) {
    write_file(path, content);
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

Dataset synthetic_dataset(std::size_t n, std::uint64_t seed, bool with_categorical) {
  FeatureSchema s = two_feature_schema();
  if (with_categorical) {
    Feature c;
    c.name = "color";
    c.kind = FeatureKind::categorical;
    c.categories = {"a", "b", "c"};
    s.features.push_back(c);
    s.validate();
  }
  Dataset ds;
  ds.schema = s;
  ds.label_names = {"0", "1"};
  ds.name = "synthetic";
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Record r;
    r.values.push_back(rng.uniform(-10.0, 10.0));
    r.values.push_back(rng.uniform(-10.0, 10.0));
    if (with_categorical) r.values.push_back(static_cast<double>(rng.index(3)));
    ds.rows.push_back(std::move(r));
    ds.labels.push_back(static_cast<int>(rng.index(2)));
  }
  return ds;
}

}  // namespace

TEST_CASE("csv parser handles quoting", "[csv]") {
  auto rows = parse_csv("a,b\n\"x,1\",\"say \"\"hi\"\"\"\r\n1,2\n\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "x,1");
  CHECK(rows[1][1] == "say \"hi\"");
  CHECK(rows[2][0] == "1");
  CHECK_THROWS_AS(parse_csv("\"open"), std::invalid_argument);

  SECTION("escape round-trips") {
    std::vector<std::vector<std::string>> cells = {{"plain", "a,b", "q\"q", "nl\nnl"}};
    CHECK(parse_csv(write_csv(cells)) == cells);
  }
}

TEST_CASE("load_csv", "[data]") {
  FeatureSchema s = two_feature_schema();

  SECTION("two data rows yield n=2") {
    TempCsv f("t_load_ok.csv", "x1,x2,label\n1.5,2,0\n-3,0.25,1\n");
    Dataset ds = load_csv(f.path, s, "label");
    REQUIRE(ds.size() == 2);
    CHECK(ds.rows[0].values == std::vector<double>{1.5, 2.0});
    CHECK(ds.labels == std::vector<int>{0, 1});
  }
  SECTION("unparseable continuous cell names row 2") {
    TempCsv f("t_load_bad.csv", "x1,x2,label\nabc,2,0\n");
    try {
      load_csv(f.path, s, "label");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
      CHECK(std::string(e.what()).find("x1") != std::string::npos);
    }
  }
  SECTION("unknown category is a validation error") {
    FeatureSchema cs = s;
    Feature c;
    c.name = "color";
    c.kind = FeatureKind::categorical;
    c.categories = {"a", "b"};
    cs.features.push_back(c);
    TempCsv f("t_load_cat.csv", "x1,x2,color,label\n1,2,Z,0\n");
    CHECK_THROWS_AS(load_csv(f.path, cs, "label"), ValidationError);
  }
  SECTION("missing column") {
    TempCsv f("t_load_miss.csv", "x1,label\n1,0\n");
    CHECK_THROWS_AS(load_csv(f.path, s, "label"), ValidationError);
  }
  SECTION("unknown label value") {
    TempCsv f("t_load_lab.csv", "x1,x2,label\n1,2,7\n");
    CHECK_THROWS_AS(load_csv(f.path, s, "label"), ValidationError);
  }
  SECTION("ragged row") {
    TempCsv f("t_load_rag.csv", "x1,x2,label\n1,2\n");
    CHECK_THROWS_AS(load_csv(f.path, s, "label"), ValidationError);
  }
}

TEST_CASE("pipeline fit and endpoints", "[transform]") {
  Dataset ds = synthetic_dataset(4, 1, true);
  ds.rows[0].values[0] = 0.0;
  ds.rows[1].values[0] = 10.0;
  ds.rows[2].values[0] = 5.0;
  ds.rows[3].values[0] = 7.0;
  TransformPipeline p = TransformPipeline::fit(ds);
  REQUIRE(p.width() == 5);  // x1, x2, 3 one-hot columns

  Record r = ds.rows[0];
  r.values[0] = 10.0;
  CHECK(p.transform(r).at(0, 0) == 1.0);
  r.values[0] = 0.0;
  CHECK(p.transform(r).at(0, 0) == 0.0);
  r.values[0] = 5.0;
  CHECK(p.transform(r).at(0, 0) == 0.5);

  SECTION("one-hot placement") {
    r.values[2] = 1.0;  // category "b"
    Tensor t = p.transform(r);
    CHECK(t.at(0, 2) == 0.0);
    CHECK(t.at(0, 3) == 1.0);
    CHECK(t.at(0, 4) == 0.0);
  }
  SECTION("argmax inverse") {
    Tensor t = p.transform(ds.rows);
    t.at(0, 2) = 0.2;
    t.at(0, 3) = 0.7;
    t.at(0, 4) = 0.1;
    std::vector<Record> back = p.inverse_transform(t);
    CHECK(back[0].values[2] == 1.0);  // "b"
  }
  SECTION("out-of-range values extend unclamped") {
    Tensor t({1, 5});
    t.at(0, 0) = 1.5;  // min 0, max 10 for x1
    std::vector<Record> back = p.inverse_transform(t);
    CHECK(back[0].values[0] == 15.0);
  }
  SECTION("unfitted pipeline refuses to run") {
    TransformPipeline q;
    CHECK_THROWS_AS(q.transform(ds.rows), ValidationError);
  }
  SECTION("empty dataset refuses to fit") {
    Dataset empty;
    empty.schema = ds.schema;
    CHECK_THROWS_AS(TransformPipeline::fit(empty), ValidationError);
  }
  SECTION("width mismatch on inverse") {
    CHECK_THROWS_AS(p.inverse_transform(Tensor({1, 4})), ValidationError);
  }
}

TEST_CASE("pipeline round-trip identity", "[transform][property]") {
  Dataset ds = synthetic_dataset(100, 2024, true);
  TransformPipeline p = TransformPipeline::fit(ds);
  std::vector<Record> back = p.inverse_transform(p.transform(ds.rows));
  REQUIRE(back.size() == ds.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(std::abs(back[i].values[0] - ds.rows[i].values[0]) <= 1e-9);
    CHECK(std::abs(back[i].values[1] - ds.rows[i].values[1]) <= 1e-9);
    CHECK(back[i].values[2] == ds.rows[i].values[2]);  // exact categorical
  }
}

TEST_CASE("constant feature maps to 0.5 and inverts to the constant",
          "[transform]") {
  Dataset ds = synthetic_dataset(5, 3, false);
  for (Record& r : ds.rows) r.values[1] = 42.0;
  TransformPipeline p = TransformPipeline::fit(ds);
  Tensor t = p.transform(ds.rows);
  for (std::size_t r = 0; r < t.rows(); ++r) CHECK(t.at(r, 1) == 0.5);
  std::vector<Record> back = p.inverse_transform(t);
  for (const Record& r : back) CHECK(r.values[1] == 42.0);
}

TEST_CASE("graph-side maps agree with the record pipeline", "[transform]") {
  Dataset ds = synthetic_dataset(6, 9, true);
  TransformPipeline p = TransformPipeline::fit(ds);
  Tensor model = p.transform(ds.rows);

  Graph g;
  Var m = g.leaf(model);
  Var raw = p.to_raw(m);
  Var model_again = p.to_model(raw);

  SECTION("to_raw recovers original continuous values") {
    const Tensor& rv = g.value(raw);
    for (std::size_t r = 0; r < ds.size(); ++r) {
      CHECK(std::abs(rv.at(r, 0) - ds.rows[r].values[0]) <= 1e-9);
      CHECK(std::abs(rv.at(r, 1) - ds.rows[r].values[1]) <= 1e-9);
      CHECK(rv.at(r, 2) == model.at(r, 2));  // one-hot block untouched
    }
  }
  SECTION("to_model(to_raw(x)) is the identity within 1e-9") {
    const Tensor& mv = g.value(model_again);
    for (std::size_t i = 0; i < mv.size(); ++i)
      CHECK(std::abs(mv[i] - model[i]) <= 1e-9);
  }
  SECTION("constant Jacobian diag(1/(max-min)) via finite differences") {
    TransformPipeline::FittedRange range = p.range_of("x1");
    Tensor one_row({1, 5});
    for (std::size_t c = 0; c < 5; ++c) one_row.at(0, c) = ds.rows[0].values[0];
    auto r = grad_check(
        [&](Graph& gg, const std::vector<Var>& v) {
          Var out = p.to_model(v[0]);
          Tensor w({1, 5});
          w.at(0, 0) = 1.0;
          return sum(mul(out, gg.constant(w)));
        },
        {one_row});
    CHECK(r.max_rel_err <= 1e-6);
    // Analytic check of the diagonal itself.
    Graph gg;
    Var x = gg.leaf(one_row);
    Var out = p.to_model(x);
    Tensor w({1, 5});
    w.at(0, 0) = 1.0;
    gg.backward(sum(mul(out, gg.constant(w))));
    CHECK(gg.grad(x).at(0, 0) ==
          Catch::Approx(1.0 / (range.max - range.min)).epsilon(1e-12));
  }
}

TEST_CASE("pipeline restore round-trips", "[transform]") {
  Dataset ds = synthetic_dataset(20, 77, true);
  TransformPipeline p = TransformPipeline::fit(ds, "classifier");
  TransformPipeline q =
      TransformPipeline::restore(p.schema(), p.kind(), p.columns());
  CHECK(q.width() == p.width());
  Tensor a = p.transform(ds.rows);
  Tensor b = q.transform(ds.rows);
  CHECK(a.data == b.data);
  CHECK(q.kind() == "classifier");
}

TEST_CASE("split sizes and determinism", "[split]") {
  SECTION("n=10 at 80/10/10 gives 8/1/1") {
    Dataset ds = synthetic_dataset(10, 5, false);
    SplitSpec spec;
    spec.seed = 3;
    SplitResult r = split(ds, spec);
    CHECK(r.train.size() == 8);
    CHECK(r.val.size() == 1);
    CHECK(r.test.size() == 1);
  }
  SECTION("same seed, same assignment; disjoint and exhaustive") {
    Dataset ds = synthetic_dataset(50, 8, false);
    for (std::size_t i = 0; i < ds.size(); ++i)
      ds.rows[i].values[0] = static_cast<double>(i);  // unique marker
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
      SplitSpec spec;
      spec.seed = seed;
      SplitResult a = split(ds, spec);
      SplitResult b = split(ds, spec);
      CHECK(a.train.rows[0].values == b.train.rows[0].values);
      CHECK(a.val.rows[0].values == b.val.rows[0].values);

      std::multiset<double> markers;
      for (const Dataset* part : {&a.train, &a.val, &a.test})
        for (const Record& r : part->rows) markers.insert(r.values[0]);
      REQUIRE(markers.size() == 50);  // exhaustive
      CHECK(std::set<double>(markers.begin(), markers.end()).size() == 50);  // disjoint
    }
  }
  SECTION("stratified 90:10 over n=100 puts 72:8 in train") {
    Dataset ds = synthetic_dataset(100, 13, false);
    for (std::size_t i = 0; i < 100; ++i) ds.labels[i] = i < 90 ? 0 : 1;
    SplitSpec spec;
    spec.stratify = true;
    spec.seed = 21;
    SplitResult r = split(ds, spec);
    std::size_t zeros = 0, ones = 0;
    for (int y : r.train.labels) (y == 0 ? zeros : ones)++;
    CHECK(zeros == 72);
    CHECK(ones == 8);
    CHECK(r.val.size() == 10);
    CHECK(r.test.size() == 10);
  }
  SECTION("errors") {
    Dataset ds = synthetic_dataset(3, 1, false);
    SplitSpec bad;
    bad.train = 0.5;
    bad.val = 0.2;
    bad.test = 0.2;
    CHECK_THROWS_AS(split(ds, bad), ValidationError);  // sums to 0.9
    SplitSpec zero;
    zero.train = 1.0;
    zero.val = 0.0;
    zero.test = 0.0;
    CHECK_THROWS_AS(split(ds, zero), ValidationError);  // non-positive fractions
    Dataset tiny = synthetic_dataset(2, 1, false);
    SplitSpec spec;
    CHECK_THROWS_AS(split(tiny, spec), ValidationError);  // n < 3
    // 98/1/1 over n=4 starves a split.
    Dataset four = synthetic_dataset(4, 1, false);
    SplitSpec starve;
    starve.train = 0.98;
    starve.val = 0.01;
    starve.test = 0.01;
    CHECK_THROWS_AS(split(four, starve), ValidationError);
  }
}

TEST_CASE("value_map exposes continuous features for constraints", "[data]") {
  Dataset ds = synthetic_dataset(1, 4, true);
  std::map<std::string, double> vm = value_map(ds.schema, ds.rows[0]);
  CHECK(vm.size() == 2);
  CHECK(vm.count("x1") == 1);
  CHECK(vm.count("color") == 0);
}

TEST_CASE("dataset csv round-trip", "[data]") {
  Dataset ds = synthetic_dataset(12, 31, true);
  TempCsv f("t_roundtrip.csv", dataset_to_csv(ds));
  Dataset back = load_csv(f.path, ds.schema, "label");
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.rows[i].values == ds.rows[i].values);  // exact via shortest repr
    CHECK(back.labels[i] == ds.labels[i]);
  }
}
