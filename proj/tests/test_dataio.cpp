#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "egd/dataio.hpp"
#include "egd/synthetic.hpp"

using namespace egd;
using namespace egd::dataio;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("egd_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::trunc);
  f << content;
}

std::string identity_row() {
  // 76 columns: 38 master zeros, then two PSM blocks with identity rotations
  std::string row;
  for (int i = 0; i < 38; ++i) row += "0.0 ";
  for (int arm = 0; arm < 2; ++arm) {
    row += "0.0 0.0 0.0 ";                                // position
    row += "1.0 0.0 0.0 0.0 1.0 0.0 0.0 0.0 1.0 ";        // rotation
    row += "0.0 0.0 0.0 0.0 0.0 0.0 ";                    // velocities
    row += arm == 0 ? "0.0 " : "0.0";                     // gripper
  }
  return row + "\n";
}

TrialRecord stub_trial(TaskClass task, const std::string& subject, int rep) {
  TrialRecord t;
  t.task = task;
  t.trial_id = task_name(task) + "_" + subject + "00" + std::to_string(rep);
  t.subject_id = subject;
  t.repetition_index = rep;
  return t;
}

}  // namespace

TEST_CASE("parse_kinematics: zero/identity row, row count, malformed rows") {
  const auto dir = tmp_dir("kin");
  write(dir / "ok.txt", identity_row());
  auto samples = parse_kinematics(dir / "ok.txt");
  REQUIRE(samples.size() == 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(samples[0].left.position[i] == 0.0);
    CHECK(samples[0].right.linear_velocity[i] == 0.0);
  }
  CHECK(samples[0].left.rotation[0] == 1.0);
  CHECK(samples[0].right.rotation[8] == 1.0);

  std::string thousand;
  for (int i = 0; i < 1000; ++i) thousand += identity_row();
  write(dir / "k1000.txt", thousand);
  CHECK(parse_kinematics(dir / "k1000.txt").size() == 1000);

  std::string short_row = identity_row();
  short_row = short_row.substr(0, short_row.rfind(' ')) + "\n";  // 75 columns
  write(dir / "bad.txt", short_row);
  CHECK_THROWS_WITH_AS(auto r = parse_kinematics(dir / "bad.txt"),
                       doctest::Contains(":1:"), ParseError);

  write(dir / "nonnum.txt", identity_row() + "x " + identity_row());
  CHECK_THROWS_AS(auto r2 = parse_kinematics(dir / "nonnum.txt"), ParseError);

  write(dir / "empty.txt", "");
  CHECK_THROWS_AS(auto r3 = parse_kinematics(dir / "empty.txt"), ParseError);
}

TEST_CASE("parse_kinematics rotation orthonormality thresholds") {
  const auto dir = tmp_dir("rot");
  // perturb one rotation entry slightly: warn (not fail) above 1e-3
  std::string row = identity_row();
  row.replace(row.find("1.0"), 3, "1.01");
  write(dir / "warn.txt", row);
  std::vector<std::string> warnings;
  CHECK_NOTHROW(parse_kinematics(dir / "warn.txt", &warnings));
  CHECK(warnings.size() == 1);

  std::string bad = identity_row();
  bad.replace(bad.find("1.0"), 3, "1.2");  // beyond 1e-1: hard fail
  write(dir / "fail.txt", bad);
  CHECK_THROWS_AS(auto r = parse_kinematics(dir / "fail.txt"), ParseError);
}

TEST_CASE("parse_transcript basics") {
  const auto dir = tmp_dir("tr");
  write(dir / "t.txt", "80 327 G1\n330 400 G3\n");
  auto gis = parse_transcript(dir / "t.txt");
  REQUIRE(gis.size() == 2);
  CHECK(gis[0].start_frame == 80);
  CHECK(gis[0].end_frame == 327);
  CHECK(gis[0].gesture_id == 1);

  write(dir / "empty.txt", "");
  CHECK(parse_transcript(dir / "empty.txt").empty());

  write(dir / "rev.txt", "327 80 G1\n");
  CHECK_THROWS_AS(auto r = parse_transcript(dir / "rev.txt"), ParseError);

  // unsupported gesture: retained with a warning
  write(dir / "g5.txt", "10 40 G5\n");
  std::vector<std::string> warnings;
  auto g5 = parse_transcript(dir / "g5.txt", &warnings);
  REQUIRE(g5.size() == 1);
  CHECK_FALSE(g5[0].in_library());
  CHECK(warnings.size() == 1);

  write(dir / "overlap.txt", "10 40 G1\n30 60 G2\n");
  CHECK_THROWS_AS(auto r2 = parse_transcript(dir / "overlap.txt"), ValidationError);
}

TEST_CASE("parse_error_labels") {
  const auto dir = tmp_dir("lab");
  const std::string header = "task,trial,gesture_index,start_frame,end_frame,gesture,error\n";
  write(dir / "ok.csv", header + "Suturing,S_B001,3,215,340,G3,1\n");
  auto labels = parse_error_labels(dir / "ok.csv");
  const LabelKey key{"Suturing", "S_B001", 3};
  REQUIRE(labels.count(key) == 1);
  CHECK(labels[key].error == 1);
  CHECK(labels[key].start_frame == 215);

  write(dir / "bad.csv", header + "Suturing,S_B001,3,215,340,G3,2\n");
  CHECK_THROWS_AS(auto r = parse_error_labels(dir / "bad.csv"), ValidationError);

  write(dir / "dup.csv", header + "Suturing,S_B001,3,215,340,G3,1\nSuturing,S_B001,3,215,340,G3,0\n");
  CHECK_THROWS_AS(auto r2 = parse_error_labels(dir / "dup.csv"), ValidationError);
}

TEST_CASE("trial stem parsing") {
  std::string subject;
  int rep = 0;
  CHECK(parse_trial_stem("Suturing_B001", subject, rep));
  CHECK(subject == "B");
  CHECK(rep == 1);
  CHECK(parse_trial_stem("Needle_Passing_C005", subject, rep));
  CHECK(subject == "C");
  CHECK(rep == 5);
  CHECK_FALSE(parse_trial_stem("Suturing", subject, rep));
  CHECK_FALSE(parse_trial_stem("Suturing_123", subject, rep));
}

TEST_CASE("LOSO folds partition by repetition") {
  DatasetManifest m;
  for (TaskClass task : {TaskClass::Suturing, TaskClass::NeedlePassing})
    for (int s = 0; s < 8; ++s)
      for (int r = 1; r <= 5; ++r)
        m.trials.push_back(stub_trial(task, std::string(1, static_cast<char>('A' + s)), r));

  auto folds = split_loso_folds(m);
  REQUIRE(folds.size() == 5);
  std::set<int> seen;
  for (const auto& fold : folds) {
    // 8 subjects x 5 repetitions: 32 train + 8 test per task
    CHECK(fold.test_trials.size() == 16);
    CHECK(fold.train_trials.size() == 64);
    int test_s = 0, test_np = 0;
    for (int i : fold.test_trials) {
      CHECK(m.trials[i].repetition_index == fold.held_out_repetition);
      (m.trials[i].task == TaskClass::Suturing ? test_s : test_np)++;
      CHECK(seen.insert(i).second);  // pairwise disjoint test sets
    }
    CHECK(test_s == 8);
    CHECK(test_np == 8);
    for (int i : fold.train_trials)
      CHECK(m.trials[i].repetition_index != fold.held_out_repetition);
  }
  CHECK(seen.size() == m.trials.size());  // folds cover the whole set

  DatasetManifest single;
  single.trials.push_back(stub_trial(TaskClass::Suturing, "A", 1));
  CHECK_THROWS_AS(split_loso_folds(single), ValidationError);
}

TEST_CASE("synthetic generation is a pure function of (config, seed)") {
  SyntheticConfig cfg;
  cfg.subjects = 1;
  cfg.gesture_sequence = {1, 3};
  const auto d1 = tmp_dir("synth_a");
  const auto d2 = tmp_dir("synth_b");
  generate_synthetic(cfg, 7, d1);
  generate_synthetic(cfg, 7, d2);

  size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), d1);
    std::ifstream a(e.path(), std::ios::binary), b(d2 / rel, std::ios::binary);
    REQUIRE(b.good());
    std::string ca((std::istreambuf_iterator<char>(a)), {});
    std::string cb((std::istreambuf_iterator<char>(b)), {});
    CHECK(ca == cb);
    ++compared;
  }
  CHECK(compared == 1 * 5 * 2 * 2 + 2);  // kin+transcript per trial, labels, manifest

  // different seed gives a different tree
  const auto d3 = tmp_dir("synth_c");
  generate_synthetic(cfg, 8, d3);
  std::ifstream a(d1 / "Suturing" / "kinematics" / "AllGestures" / "Suturing_A001.txt");
  std::ifstream b(d3 / "Suturing" / "kinematics" / "AllGestures" / "Suturing_A001.txt");
  std::string ca((std::istreambuf_iterator<char>(a)), {});
  std::string cb((std::istreambuf_iterator<char>(b)), {});
  CHECK(ca != cb);
}

TEST_CASE("synthetic dataset assembles, counts and error rate zero") {
  SyntheticConfig cfg;
  cfg.subjects = 2;
  cfg.error_rate = 0.0;
  const auto dir = tmp_dir("synth_zero");
  auto manifest = generate_synthetic(cfg, 11, dir);
  CHECK(manifest.trials.size() == 2 * 5 * 2);
  CHECK(manifest.synthetic);

  // labels CSV all zeros and every instance labeled normal
  for (const auto& t : manifest.trials) {
    CHECK(t.gesture_instances.size() == cfg.gesture_sequence.size());
    for (const auto& gi : t.gesture_instances) CHECK(gi.error_label == 0);
  }

  // instance counts equal transcript line counts
  auto counts = instance_counts(manifest);
  int total = 0;
  for (const auto& [k, c] : counts) {
    total += c.first;
    CHECK(c.second == 0);
  }
  CHECK(total == static_cast<int>(manifest.trials.size() * cfg.gesture_sequence.size()));

  CHECK_THROWS_AS(
      [&] {
        SyntheticConfig bad;
        bad.error_rate = 1.5;
        bad.validate();
      }(),
      ValidationError);
}

TEST_CASE("assemble_dataset error paths") {
  SyntheticConfig cfg;
  cfg.subjects = 1;
  cfg.gesture_sequence = {1, 2};
  const auto dir = tmp_dir("asm");
  generate_synthetic(cfg, 3, dir);

  // missing label row -> hard error listing the instance
  std::ifstream lf(dir / "labels.csv");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(lf, line)) lines.push_back(line);
  lf.close();
  std::string missing;
  for (size_t i = 0; i + 1 < lines.size(); ++i) missing += lines[i] + "\n";
  write(dir / "missing.csv", missing);
  CHECK_THROWS_WITH_AS(assemble_dataset(dir, dir / "missing.csv"),
                       doctest::Contains("unlabeled"), ValidationError);

  // label/transcript mismatch -> error
  std::string mismatched;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i == 1) {
      auto l = lines[i];
      l.replace(l.rfind(",G"), std::string::npos, ",G9,0");
      mismatched += l + "\n";
    } else {
      mismatched += lines[i] + "\n";
    }
  }
  write(dir / "mismatch.csv", mismatched);
  CHECK_THROWS_WITH_AS(assemble_dataset(dir, dir / "mismatch.csv"),
                       doctest::Contains("disagrees"), ValidationError);

  // kinematics without transcript -> skipped with a warning
  fs::remove(dir / "Suturing" / "transcriptions" / "Suturing_A001.txt");
  std::string fewer;
  for (const auto& l : lines)
    if (l.find("Suturing_A001") == std::string::npos) fewer += l + "\n";
  write(dir / "fewer.csv", fewer);
  std::vector<std::string> warnings;
  auto manifest = assemble_dataset(dir, dir / "fewer.csv", &warnings);
  CHECK(manifest.trials.size() == 9);
  bool found = false;
  for (const auto& w : warnings) found = found || w.find("skipped") != std::string::npos;
  CHECK(found);
}

TEST_CASE("transcript parse then serialize reproduces the file token for token") {
  SyntheticConfig cfg;
  cfg.subjects = 1;
  const auto dir = tmp_dir("tr_roundtrip");
  generate_synthetic(cfg, 13, dir);
  for (const auto& e :
       fs::recursive_directory_iterator(dir / "Suturing" / "transcriptions")) {
    const auto parsed = parse_transcript(e.path());
    std::ifstream f(e.path());
    const std::string original((std::istreambuf_iterator<char>(f)), {});
    CHECK(serialize_transcript(parsed) == original);
  }
}
