#include <doctest.h>

#include "ocs/cogmap.hpp"

#include <filesystem>

using namespace ocs;
using ad::Array;
using ad::Var;

namespace {

CameraPose make_cam(Vec3 pos, double yaw, double pitch = -0.5, double far = 20.0) {
  CameraPose cam;
  cam.position = pos;
  cam.yaw = yaw;
  cam.pitch = pitch;
  cam.intrinsics = {22.85, 32, 32, 0.1, far};
  return cam;
}

LatentParams params_at(double x, double z, double yaw, double logit) {
  LatentParams p = LatentParams::zeros();
  Array w(1, 3);
  w << x, z, yaw;
  p.mu_where = Var::constant(w);
  p.logit_pres = Var::constant(Array::Constant(1, 1, logit));
  return p;
}

LatentParams prior_pad() { return params_at(0, -4, 0, 0.0); }

CognitiveMap::LayoutFactory layout_factory() {
  return [](const GroundPose& center) {
    LatentParams p = LatentParams::zeros();
    Array w(1, 3);
    w << center.x, center.z, 0.0;
    p.mu_where = Var::constant(w);
    p.log_sigma_where = Var::constant(Array::Constant(1, 3, -20.0));
    p.logit_pres = Var::constant(Array::Constant(1, 1, 30.0));
    return p;
  };
}

MapEntry object_entry(std::int64_t id, double x, double z, double yaw, double logit) {
  MapEntry e;
  e.id = id;
  e.kind = EntryKind::object;
  e.params = params_at(x, z, yaw, logit);
  return e;
}

}  // namespace

TEST_CASE("in_view basics") {
  auto cam = make_cam({0, 3, 5}, 0.0);
  MapEntry ahead = object_entry(1, 0.0, -1.0, 0.0, 1.0);  // on the view axis
  MapEntry behind = object_entry(2, 0.0, 12.0, 0.0, 1.0);
  CHECK(entry_in_view(ahead, cam, 0.0));
  CHECK_FALSE(entry_in_view(behind, cam, 0.0));
}

TEST_CASE("in_view agrees with projection brute force on random pairs") {
  Rng rng(55);
  for (int i = 0; i < 10000; ++i) {
    auto cam = make_cam({rng.uniform(-8, 8), rng.uniform(1.5, 6), rng.uniform(-8, 8)},
                        rng.uniform(-kPi, kPi), rng.uniform(-1.2, -0.1),
                        rng.uniform(8, 25));
    MapEntry e = object_entry(1, rng.uniform(-15, 15), rng.uniform(-15, 15), 0, 0);
    double u, v, t;
    Vec3 p(e.params.mu_where.value()(0, 0), 0.0, e.params.mu_where.value()(0, 1));
    bool brute = project(cam, p, u, v, t) && u >= 0 && u <= cam.intrinsics.width &&
                 v >= 0 && v <= cam.intrinsics.height && t >= cam.intrinsics.near_clip &&
                 t <= cam.intrinsics.far_clip;
    CHECK(entry_in_view(e, cam, 0.0) == brute);
  }
}

TEST_CASE("empty map query pads with K fresh prior slots") {
  CognitiveMap map;
  auto cam = make_cam({0, 3, 6}, 0.0);
  auto res = map.query(cam, 7, prior_pad(), layout_factory());
  REQUIRE(res.slots.size() == 7);
  for (const auto& id : res.slot_ids) CHECK_FALSE(id.has_value());
  // exactly one layout tile created
  CHECK(map.entries().size() == 1);
  CHECK(map.entries()[0].kind == EntryKind::layout);
  CHECK(res.layout_id == map.entries()[0].id);
}

TEST_CASE("overflow keeps the top-K presence logits") {
  CognitiveMap map;
  map.in_view_margin = 0.0;
  auto cam = make_cam({0, 4, 8}, 0.0, -0.55);
  // nine entries straight ahead at varying logits
  for (int i = 0; i < 9; ++i)
    map.entries().push_back(object_entry(100 + i, -2.0 + 0.5 * i, 0.0, 0.0, 0.1 * i));
  map.set_next_id(200);
  auto res = map.query(cam, 7, prior_pad(), layout_factory());
  REQUIRE(res.slots.size() == 7);
  std::vector<std::int64_t> got;
  for (const auto& id : res.slot_ids) {
    REQUIRE(id.has_value());
    got.push_back(*id);
  }
  // largest logits were 108..102, returned in descending order
  std::vector<std::int64_t> want = {108, 107, 106, 105, 104, 103, 102};
  CHECK(got == want);
}

TEST_CASE("query transforms where into the camera frame") {
  CognitiveMap map;
  double gx = 1.5, gz = -2.0, gyaw = 0.7;
  map.entries().push_back(object_entry(5, gx, gz, gyaw, 2.0));
  map.set_next_id(6);
  auto cam = make_cam({gx, 3.0, gz + 6.0}, 0.15, -0.5);
  REQUIRE(entry_in_view(map.entries()[0], cam, 0.0));
  auto res = map.query(cam, 1, prior_pad(), layout_factory());
  auto ref = transform_where(GroundPose{gx, gz, gyaw}, camera_ground_pose(cam),
                             FrameDir::to_camera);
  CHECK(res.slots[0].mu_where.value()(0, 0) == doctest::Approx(ref.x).epsilon(1e-12));
  CHECK(res.slots[0].mu_where.value()(0, 1) == doctest::Approx(ref.z).epsilon(1e-12));
  CHECK(res.slots[0].mu_where.value()(0, 2) == doctest::Approx(ref.yaw).epsilon(1e-12));
}

TEST_CASE("registration discards low presence and keeps ids") {
  CognitiveMap map;
  auto cam = make_cam({0, 3, 6}, 0.0);
  auto res = map.query(cam, 3, prior_pad(), layout_factory());

  // slot 0: presence 0.3 -> dropped; slot 1: presence 0.9 -> registered
  auto low = params_at(0.0, -4.0, 0.0, std::log(0.3 / 0.7));
  auto high = params_at(1.0, -5.0, 0.2, std::log(0.9 / 0.1));
  map.register_slots({low, high, prior_pad()}, res.slot_ids, res.layout,
                     res.layout_id, cam, 1);
  // prior_pad has logit 0 -> presence 0.5 -> tie keeps it
  CHECK(map.object_count() == 2);

  // re-register the existing entry with updated params under the same id
  auto res2 = map.query(cam, 2, prior_pad(), layout_factory());
  REQUIRE(res2.slot_ids[0].has_value());
  std::int64_t id = *res2.slot_ids[0];
  auto updated = params_at(res2.slots[0].mu_where.value()(0, 0) + 0.1,
                           res2.slots[0].mu_where.value()(0, 1),
                           res2.slots[0].mu_where.value()(0, 2), 3.0);
  auto drop = params_at(0, -4, 0, -5.0);
  map.register_slots({updated, drop}, res2.slot_ids, res2.layout, res2.layout_id,
                     cam, 2);
  auto res3 = map.query(cam, 2, prior_pad(), layout_factory());
  CHECK(res3.slot_ids[0] == id);
  CHECK(map.object_count() == 1);

  // an existing entry re-registered below threshold is deleted
  auto res4 = map.query(cam, 1, prior_pad(), layout_factory());
  auto gone = params_at(0, -4, 0, -5.0);
  map.register_slots({gone}, res4.slot_ids, res4.layout, res4.layout_id, cam, 3);
  CHECK(map.object_count() == 0);
}

TEST_CASE("register then query round trips camera-frame mu_where") {
  CognitiveMap map;
  Rng rng(77);
  auto cam = make_cam({2.0, 3.5, 4.0}, 0.6, -0.6);
  auto res = map.query(cam, 4, prior_pad(), layout_factory());
  std::vector<LatentParams> slots;
  for (int i = 0; i < 4; ++i)
    slots.push_back(params_at(rng.uniform(-1.5, 1.5), rng.uniform(-8, -3),
                              rng.uniform(-1, 1), 2.0));
  map.register_slots(slots, res.slot_ids, res.layout, res.layout_id, cam, 1);
  auto back = map.query(cam, 4, prior_pad(), layout_factory());
  REQUIRE(back.slots.size() == 4);
  int matched = 0;
  for (const auto& s : slots) {
    for (const auto& b : back.slots) {
      if ((b.mu_where.value() - s.mu_where.value()).abs().maxCoeff() < 1e-6) {
        ++matched;
        break;
      }
    }
  }
  CHECK(matched == 4);
}

TEST_CASE("out-of-view entries are bit-unchanged by a query-register cycle") {
  CognitiveMap map;
  // entry far behind the camera
  map.entries().push_back(object_entry(9, 0.0, 50.0, 0.25, 1.5));
  map.set_next_id(10);
  auto before = map.entries()[0].params.flat_values();
  auto cam = make_cam({0, 3, 6}, 0.0);
  auto res = map.query(cam, 3, prior_pad(), layout_factory());
  for (const auto& id : res.slot_ids) CHECK_FALSE(id.has_value());
  std::vector<LatentParams> slots = {params_at(0, -4, 0, 2.0),
                                     params_at(1, -5, 0, 2.0),
                                     params_at(-1, -6, 0, -3.0)};
  map.register_slots(slots, res.slot_ids, res.layout, res.layout_id, cam, 1);
  auto after = map.find(9)->params.flat_values();
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("registration is idempotent for unchanged slots") {
  CognitiveMap map;
  auto cam = make_cam({0, 3, 6}, 0.0);
  auto res = map.query(cam, 2, prior_pad(), layout_factory());
  std::vector<LatentParams> slots = {params_at(0.5, -4, 0.1, 2.0),
                                     params_at(-0.5, -5, -0.1, 2.0)};
  map.register_slots(slots, res.slot_ids, res.layout, res.layout_id, cam, 1);
  auto snapshot = [&] {
    std::vector<std::vector<double>> all;
    for (const auto& e : map.entries()) all.push_back(e.params.flat_values());
    return all;
  };
  auto first = snapshot();
  auto res2 = map.query(cam, 2, prior_pad(), layout_factory());
  map.register_slots(res2.slots, res2.slot_ids, res2.layout, res2.layout_id, cam, 2);
  auto second = snapshot();
  REQUIRE(first.size() == second.size());
  for (size_t i = 0; i < first.size(); ++i) {
    REQUIRE(first[i].size() == second[i].size());
    for (size_t k = 0; k < first[i].size(); ++k)
      CHECK(first[i][k] == doctest::Approx(second[i][k]).epsilon(1e-12));
  }
}

TEST_CASE("exactly one layout tile is active per query") {
  CognitiveMap map;
  auto cam1 = make_cam({1, 3, 1}, 0.0);
  auto cam2 = make_cam({-9, 3, 1}, 1.0);  // different tile
  auto r1 = map.query(cam1, 2, prior_pad(), layout_factory());
  auto r2 = map.query(cam2, 2, prior_pad(), layout_factory());
  auto r3 = map.query(cam1, 2, prior_pad(), layout_factory());
  CHECK(r1.layout_id != r2.layout_id);
  CHECK(r1.layout_id == r3.layout_id);
  int layouts = 0;
  for (const auto& e : map.entries())
    if (e.kind == EntryKind::layout) ++layouts;
  CHECK(layouts == 2);
  // the active tile contains the camera position
  auto [ix, iz] = map.tile_of(cam1.position.x(), cam1.position.z());
  const auto* tile = map.find(r1.layout_id);
  CHECK(tile->tile_ix == ix);
  CHECK(tile->tile_iz == iz);
}

TEST_CASE("mismatched slot and id lengths are rejected") {
  CognitiveMap map;
  auto cam = make_cam({0, 3, 6}, 0.0);
  auto res = map.query(cam, 2, prior_pad(), layout_factory());
  std::vector<LatentParams> slots = {prior_pad()};
  CHECK_THROWS_AS(map.register_slots(slots, res.slot_ids, res.layout, res.layout_id,
                                     cam, 1),
                  std::invalid_argument);
}

TEST_CASE("map serialization round-trips bit-exactly") {
  CognitiveMap map;
  Rng rng(123);
  auto cam = make_cam({0, 3, 6}, 0.3);
  auto res = map.query(cam, 3, prior_pad(), layout_factory());
  std::vector<LatentParams> slots;
  for (int i = 0; i < 3; ++i) {
    LatentParams p = LatentParams::zeros();
    Array w(1, 3);
    w << rng.normal() * 3, rng.normal() * 3 - 5, rng.uniform(-kPi, kPi);
    p.mu_where = Var::constant(w);
    Array mw(1, kWhatDim), ls(1, kWhatDim);
    for (int k = 0; k < kWhatDim; ++k) {
      mw(0, k) = rng.normal();
      ls(0, k) = rng.normal() * 0.3;
    }
    p.mu_what = Var::constant(mw);
    p.log_sigma_what = Var::constant(ls);
    p.logit_pres = Var::constant(Array::Constant(1, 1, rng.normal() + 1.5));
    slots.push_back(p);
  }
  map.register_slots(slots, res.slot_ids, res.layout, res.layout_id, cam, 4);
  map.find(res.layout_id)->decoder_ref = "decoders/tile_0.bin";

  auto path = std::filesystem::temp_directory_path() / "ocs_map_test.json";
  save_map(map, path);
  auto loaded = load_map(path);
  REQUIRE(loaded.entries().size() == map.entries().size());
  CHECK(loaded.next_id() == map.next_id());
  for (size_t i = 0; i < map.entries().size(); ++i) {
    const auto &a = map.entries()[i], &b = loaded.entries()[i];
    CHECK(a.id == b.id);
    CHECK(a.kind == b.kind);
    CHECK(a.decoder_ref == b.decoder_ref);
    CHECK(a.last_update_step == b.last_update_step);
    auto av = a.params.flat_values(), bv = b.params.flat_values();
    REQUIRE(av.size() == bv.size());
    for (size_t k = 0; k < av.size(); ++k) CHECK(av[k] == bv[k]);
  }
  std::filesystem::remove(path);
}
