#include <catch2/catch_amalgamated.hpp>

#include "psds_oracle.hpp"
#include "sedkit/psds.hpp"
#include "sedkit/rng.hpp"

using namespace sedkit;

namespace {

PsdsParams scenario1_params() {
  PsdsParams p;
  p.dtc = 0.7;
  p.gtc = 0.7;
  p.alpha_st = 1.0;
  p.alpha_ct = 0.0;
  p.e_max = 100.0;
  return p;
}

PsdsParams scenario2_params() {
  PsdsParams p;
  p.dtc = 0.1;
  p.gtc = 0.1;
  p.cttc = 0.3;
  p.alpha_st = 1.0;
  p.alpha_ct = 0.5;
  p.e_max = 100.0;
  return p;
}

struct RandomCorpus {
  GroundTruth gt;
  std::map<double, ClipEvents> detections;
  // Flat mirrors for the oracle.
  std::vector<psds_oracle::Row> gt_rows;
  std::vector<std::vector<psds_oracle::Row>> det_rows;
};

RandomCorpus make_random_corpus(Rng& rng, int max_clips = 5, int max_classes = 3, int max_events = 20) {
  RandomCorpus corpus;
  const int n_clips = 1 + static_cast<int>(rng.uniform_int(max_clips));
  const int n_classes = 1 + static_cast<int>(rng.uniform_int(max_classes));
  std::vector<std::string> classes;
  for (int c = 0; c < n_classes; ++c) classes.push_back("cls" + std::to_string(c));

  std::vector<std::string> clips;
  for (int i = 0; i < n_clips; ++i) {
    const std::string clip = "clip" + std::to_string(i);
    clips.push_back(clip);
    corpus.gt.clip_durations[clip] = rng.uniform(5.0, 30.0);
  }

  // Ground truth: at least one event per class so every class has duration.
  const int n_events = n_classes + static_cast<int>(rng.uniform_int(max_events - n_classes + 1));
  for (int e = 0; e < n_events; ++e) {
    const std::string& clip = clips[static_cast<std::size_t>(rng.uniform_int(n_clips))];
    const std::string& label =
        classes[static_cast<std::size_t>(e < n_classes ? e : rng.uniform_int(n_classes))];
    const double dur = corpus.gt.clip_durations[clip];
    const double onset = rng.uniform(0.0, dur * 0.8);
    const double offset = std::min(dur, onset + rng.uniform(0.05, 5.0));
    corpus.gt.events[clip].push_back(TimedEvent{onset, offset, label});
    corpus.gt_rows.push_back({clip, label, onset, offset});
  }
  for (auto& [clip, list] : corpus.gt.events) sort_events(list);

  // Detections: a handful of thresholds with unrelated random event sets.
  const int n_thresholds = 1 + static_cast<int>(rng.uniform_int(4));
  for (int k = 0; k < n_thresholds; ++k) {
    const double tau = rng.uniform(0.05, 0.95);
    ClipEvents dets;
    std::vector<psds_oracle::Row> rows;
    const int n_dets = static_cast<int>(rng.uniform_int(max_events + 1));
    for (int i = 0; i < n_dets; ++i) {
      const std::string& clip = clips[static_cast<std::size_t>(rng.uniform_int(n_clips))];
      const std::string& label = classes[static_cast<std::size_t>(rng.uniform_int(n_classes))];
      const double dur = corpus.gt.clip_durations[clip];
      const double onset = rng.uniform(0.0, dur * 0.9);
      const double offset = std::min(dur, onset + rng.uniform(0.05, 6.0));
      dets[clip].push_back(TimedEvent{onset, offset, label});
      rows.push_back({clip, label, onset, offset});
    }
    corpus.detections[tau] = std::move(dets);
    corpus.det_rows.push_back(std::move(rows));
  }
  return corpus;
}

psds_oracle::Params to_oracle(const PsdsParams& p) {
  psds_oracle::Params o;
  o.dtc = p.dtc;
  o.gtc = p.gtc;
  o.cttc = p.cttc;
  o.alpha_st = p.alpha_st;
  o.alpha_ct = p.alpha_ct;
  o.e_max = p.e_max;
  return o;
}

GroundTruth single_event_gt(double onset, double offset, double clip_dur = 10.0) {
  GroundTruth gt;
  gt.clip_durations["clip0"] = clip_dur;
  gt.events["clip0"].push_back(TimedEvent{onset, offset, "cls0"});
  return gt;
}

}  // namespace

TEST_CASE("matching: mostly-overlapping detection is a TP under strict criteria") {
  auto gt = single_event_gt(1.0, 2.0);
  ClipEvents dets;
  dets["clip0"].push_back(TimedEvent{0.9, 2.1, "cls0"});
  auto counts = match_operating_point(dets, gt, scenario1_params(), gt.classes());
  CHECK(counts.tp.at("cls0") == 1);
  CHECK(counts.fp.at("cls0") == 0);
}

TEST_CASE("matching: loose detection flips between FP and TP across scenarios") {
  auto gt = single_event_gt(1.0, 2.0);
  ClipEvents dets;
  dets["clip0"].push_back(TimedEvent{0.5, 2.5, "cls0"});  // DTC ratio 0.5

  auto strict = match_operating_point(dets, gt, scenario1_params(), gt.classes());
  CHECK(strict.tp.at("cls0") == 0);
  CHECK(strict.fp.at("cls0") == 1);

  PsdsParams lax = scenario2_params();
  auto loose = match_operating_point(dets, gt, lax, gt.classes());
  CHECK(loose.tp.at("cls0") == 1);
  CHECK(loose.fp.at("cls0") == 0);
}

TEST_CASE("matching: no detections means zero counts") {
  auto gt = single_event_gt(1.0, 2.0);
  auto counts = match_operating_point({}, gt, scenario1_params(), gt.classes());
  CHECK(counts.tp.at("cls0") == 0);
  CHECK(counts.fp.at("cls0") == 0);
}

TEST_CASE("matching rejects unknown classes and clips") {
  auto gt = single_event_gt(1.0, 2.0);
  ClipEvents bad_class;
  bad_class["clip0"].push_back(TimedEvent{0.0, 1.0, "mystery"});
  CHECK_THROWS_AS(match_operating_point(bad_class, gt, scenario1_params(), gt.classes()), DataError);

  ClipEvents bad_clip;
  bad_clip["nope"].push_back(TimedEvent{0.0, 1.0, "cls0"});
  CHECK_THROWS_AS(match_operating_point(bad_clip, gt, scenario1_params(), gt.classes()), DataError);
}

TEST_CASE("cross-triggers count against sufficiently covered other classes") {
  GroundTruth gt;
  gt.clip_durations["clip0"] = 10.0;
  gt.events["clip0"].push_back(TimedEvent{0.0, 1.0, "cls0"});
  gt.events["clip0"].push_back(TimedEvent{4.0, 8.0, "cls1"});

  // cls0 detection lying inside the cls1 event: DTC-invalid for cls0 and
  // fully covered by cls1.
  ClipEvents dets;
  dets["clip0"].push_back(TimedEvent{4.5, 6.5, "cls0"});
  auto counts = match_operating_point(dets, gt, scenario2_params(), gt.classes());
  CHECK(counts.fp.at("cls0") == 1);
  CHECK(counts.ct.at({"cls0", "cls1"}) == 1);
}

TEST_CASE("rates: 3 FPs over half an hour give eFPR 6 per hour") {
  GroundTruth gt;
  gt.clip_durations["clip0"] = 1800.0;
  gt.events["clip0"].push_back(TimedEvent{0.0, 10.0, "cls0"});

  OperatingPointCounts counts;
  counts.tp["cls0"] = 0;
  counts.fp["cls0"] = 3;
  auto r = rates(counts, gt, scenario1_params(), gt.classes());
  CHECK(r.at("cls0").efpr == Catch::Approx(6.0));
}

TEST_CASE("rates: perfect detection gives TPR 1 per class") {
  Rng rng(100);
  auto corpus = make_random_corpus(rng);
  ClipEvents perfect = corpus.gt.events;
  auto counts = match_operating_point(perfect, corpus.gt, scenario1_params(), corpus.gt.classes());
  auto r = rates(counts, corpus.gt, scenario1_params(), corpus.gt.classes());
  for (const auto& c : corpus.gt.classes()) CHECK(r.at(c).tpr == 1.0);
}

TEST_CASE("psd_roc anchors: perfect is 1, empty is 0, constant split is 0.5") {
  const std::vector<std::string> classes = {"a", "b"};
  const auto params = scenario1_params();

  std::map<std::string, ClassRates> perfect;
  perfect["a"] = {1.0, 0.0};
  perfect["b"] = {1.0, 0.0};
  CHECK(psd_roc({perfect}, params, classes).psds == 1.0);

  std::map<std::string, ClassRates> nothing;
  nothing["a"] = {0.0, 0.0};
  nothing["b"] = {0.0, 0.0};
  CHECK(psd_roc({nothing}, params, classes).psds == 0.0);

  // S_a = 1 and S_b = 0.5 over the whole range: mean 0.75, popstd 0.25.
  std::map<std::string, ClassRates> split;
  split["a"] = {1.0, 0.0};
  split["b"] = {0.5, 0.0};
  CHECK(psd_roc({split}, params, classes).psds == 0.5);
}

TEST_CASE("evaluate: detections equal to ground truth score exactly 1") {
  Rng rng(200);
  auto corpus = make_random_corpus(rng);
  std::map<double, ClipEvents> dets;
  dets[0.5] = corpus.gt.events;
  for (const auto& params : {scenario1_params(), scenario2_params()}) {
    auto report = evaluate(dets, corpus.gt, params);
    CHECK(report.psds == 1.0);
  }
}

TEST_CASE("evaluate: no detections score exactly 0") {
  Rng rng(201);
  auto corpus = make_random_corpus(rng);
  std::map<double, ClipEvents> dets;
  dets[0.3] = {};
  dets[0.7] = {};
  auto report = evaluate(dets, corpus.gt, scenario1_params());
  CHECK(report.psds == 0.0);
}

TEST_CASE("evaluate matches the brute-force oracle on random corpora") {
  Rng rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    auto corpus = make_random_corpus(rng);
    for (const auto& params : {scenario1_params(), scenario2_params()}) {
      const auto report = evaluate(corpus.detections, corpus.gt, params);
      const double expected = psds_oracle::evaluate(corpus.det_rows, corpus.gt_rows,
                                                    corpus.gt.clip_durations, to_oracle(params));
      CHECK(std::abs(report.psds - expected) < 1e-9);
      CHECK(report.psds >= 0.0);
      CHECK(report.psds <= 1.0);
    }
  }
}

TEST_CASE("adding an exactly-matching detection never lowers the score") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    auto corpus = make_random_corpus(rng);
    const auto params = scenario1_params();
    const double before = evaluate(corpus.detections, corpus.gt, params).psds;

    // Copy one ground-truth event into every threshold's detection set: it
    // is DTC-valid by construction and adds no FP or cross-trigger.
    const auto& [clip, events] = *corpus.gt.events.begin();
    const auto& ev = events.front();
    auto dets = corpus.detections;
    for (auto& [tau, clip_events] : dets) clip_events[clip].push_back(ev);

    const double after = evaluate(dets, corpus.gt, params).psds;
    CHECK(after >= before - 1e-12);
  }
}

TEST_CASE("single-class corpora: relaxing the criteria never lowers the score") {
  Rng rng(88);
  for (int trial = 0; trial < 20; ++trial) {
    auto corpus = make_random_corpus(rng, 3, 1, 12);
    REQUIRE(corpus.gt.classes().size() == 1);
    PsdsParams strict = scenario1_params();
    PsdsParams lax = scenario1_params();
    lax.dtc = 0.1;
    lax.gtc = 0.1;
    const double s = evaluate(corpus.detections, corpus.gt, strict).psds;
    const double l = evaluate(corpus.detections, corpus.gt, lax).psds;
    CHECK(l >= s - 1e-12);
  }
}

TEST_CASE("report curves are Pareto support curves") {
  Rng rng(99);
  auto corpus = make_random_corpus(rng, 5, 3, 20);
  auto report = evaluate(corpus.detections, corpus.gt, scenario2_params());
  for (const auto& [cls, curve] : report.curves) {
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].efpr > curve[i - 1].efpr);
      CHECK(curve[i].tpr > curve[i - 1].tpr);
    }
  }
}

TEST_CASE("psds params validation") {
  PsdsParams p = scenario1_params();
  p.dtc = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = scenario1_params();
  p.alpha_ct = 0.5;  // cttc missing
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = scenario2_params();
  p.alpha_ct = 0.0;  // cttc present but unused
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = scenario1_params();
  p.e_max = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("zero-duration cross-trigger target is a data error") {
  GroundTruth gt;
  gt.clip_durations["clip0"] = 100.0;
  gt.events["clip0"].push_back(TimedEvent{0.0, 1.0, "cls0"});
  gt.events["clip0"].push_back(TimedEvent{5.0, 6.0, "cls1"});

  OperatingPointCounts counts;
  counts.tp["cls0"] = 0;
  counts.fp["cls0"] = 1;
  counts.ct[{"cls0", "ghost"}] = 2;  // class with no ground-truth duration
  const std::vector<std::string> classes = {"cls0", "cls1", "ghost"};
  CHECK_THROWS_AS(rates(counts, gt, scenario2_params(), classes), DataError);
}
