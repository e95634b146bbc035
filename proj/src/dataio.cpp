#include "egd/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "egd/preprocess.hpp"

namespace egd::dataio {

std::string task_name(TaskClass t) {
  return t == TaskClass::Suturing ? "Suturing" : "Needle_Passing";
}

std::optional<TaskClass> parse_task(const std::string& name) {
  if (name == "Suturing") return TaskClass::Suturing;
  if (name == "Needle_Passing") return TaskClass::NeedlePassing;
  return std::nullopt;
}

bool in_gesture_library(int gesture_id) {
  return std::find(kGestureLibrary.begin(), kGestureLibrary.end(), gesture_id) !=
         kGestureLibrary.end();
}

bool is_modeled_gesture(int gesture_id) {
  return std::find(kModeledGestures.begin(), kModeledGestures.end(), gesture_id) !=
         kModeledGestures.end();
}

const std::vector<ErrorMode>& gesture_error_modes(int gesture_id) {
  using E = ErrorMode;
  static const std::map<int, std::vector<E>> table = {
      {1, {E::MultipleAttempts}},
      {2, {E::MultipleAttempts, E::OutOfView}},
      {3, {E::MultipleAttempts}},
      {4, {E::MultipleAttempts, E::NeedleOrientation}},
      {6, {E::MultipleAttempts, E::OutOfView}},
      {8, {E::MultipleAttempts, E::NeedleOrientation}},
      {9, {E::MultipleAttempts}},
  };
  static const std::vector<E> empty;
  const auto it = table.find(gesture_id);
  return it == table.end() ? empty : it->second;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::filesystem::path& file, long line_no) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw ParseError(file.string() + ":" + std::to_string(line_no) +
                     ": non-numeric token '" + tok + "'");
  return v;
}

long parse_long(const std::string& tok, const std::filesystem::path& file, long line_no) {
  long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw ParseError(file.string() + ":" + std::to_string(line_no) +
                     ": non-integer token '" + tok + "'");
  return v;
}

ArmSample read_block(const std::vector<double>& cols, const PsmBlockLayout& b) {
  ArmSample a;
  for (int i = 0; i < 3; ++i) a.position[i] = cols[b.base + b.position + i];
  for (int i = 0; i < 9; ++i) a.rotation[i] = cols[b.base + b.rotation + i];
  for (int i = 0; i < 3; ++i) a.linear_velocity[i] = cols[b.base + b.linear_velocity + i];
  for (int i = 0; i < 3; ++i)
    a.rotational_velocity[i] = cols[b.base + b.rotational_velocity + i];
  a.gripper_angle = cols[b.base + b.gripper];
  return a;
}

}  // namespace

std::vector<RawKinematicSample> parse_kinematics(const std::filesystem::path& file,
                                                 std::vector<std::string>* warnings) {
  std::ifstream f(file);
  if (!f) throw ParseError("cannot open kinematics file " + file.string());

  std::vector<RawKinematicSample> samples;
  std::string line;
  long line_no = 0;
  long soft_rotation_violations = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (static_cast<int>(toks.size()) != kKinematicColumns)
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(kKinematicColumns) + " columns, got " +
                       std::to_string(toks.size()));
    std::vector<double> cols(toks.size());
    for (size_t i = 0; i < toks.size(); ++i) cols[i] = parse_double(toks[i], file, line_no);

    RawKinematicSample s{read_block(cols, kPsm1), read_block(cols, kPsm2)};
    for (const ArmSample* arm : {&s.left, &s.right}) {
      const double err = preprocess::orthonormality_error(arm->rotation);
      if (err > 1e-1)
        throw ParseError(file.string() + ":" + std::to_string(line_no) +
                         ": rotation matrix non-orthonormal (|R'R - I| = " +
                         std::to_string(err) + ")");
      if (err > 1e-3) ++soft_rotation_violations;
    }
    samples.push_back(s);
  }
  if (samples.empty()) throw ParseError("empty kinematics file " + file.string());
  if (soft_rotation_violations > 0 && warnings)
    warnings->push_back(file.string() + ": " + std::to_string(soft_rotation_violations) +
                        " rotation blocks exceed orthonormality tolerance 1e-3");
  return samples;
}

std::vector<GestureInstance> parse_transcript(const std::filesystem::path& file,
                                              std::vector<std::string>* warnings) {
  std::ifstream f(file);
  if (!f) throw ParseError("cannot open transcript file " + file.string());

  std::vector<GestureInstance> out;
  std::string line;
  long line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 3)
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": expected '<start> <end> G<k>'");
    GestureInstance gi;
    gi.start_frame = parse_long(toks[0], file, line_no);
    gi.end_frame = parse_long(toks[1], file, line_no);
    if (gi.start_frame > gi.end_frame)
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": start frame after end frame");
    if (toks[2].size() < 2 || toks[2][0] != 'G')
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": bad gesture token '" + toks[2] + "'");
    gi.gesture_id = static_cast<int>(parse_long(toks[2].substr(1), file, line_no));
    if (!gi.in_library() && warnings)
      warnings->push_back(file.string() + ":" + std::to_string(line_no) + ": gesture G" +
                          std::to_string(gi.gesture_id) +
                          " outside the supported library; retained but not modeled");
    out.push_back(gi);
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const GestureInstance& a, const GestureInstance& b) {
                     return a.start_frame < b.start_frame;
                   });
  for (size_t i = 1; i < out.size(); ++i)
    if (out[i].start_frame <= out[i - 1].end_frame)
      throw ValidationError(file.string() + ": overlapping gesture segments at frames " +
                            std::to_string(out[i - 1].start_frame) + " and " +
                            std::to_string(out[i].start_frame));
  return out;
}

std::string serialize_transcript(const std::vector<GestureInstance>& instances) {
  std::string out;
  for (const auto& gi : instances)
    out += std::to_string(gi.start_frame) + " " + std::to_string(gi.end_frame) + " G" +
           std::to_string(gi.gesture_id) + "\n";
  return out;
}

std::map<LabelKey, LabelRow> parse_error_labels(const std::filesystem::path& file) {
  std::ifstream f(file);
  if (!f) throw ParseError("cannot open labels file " + file.string());

  std::string line;
  long line_no = 0;
  if (!std::getline(f, line)) throw ParseError("empty labels file " + file.string());
  ++line_no;
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line != "task,trial,gesture_index,start_frame,end_frame,gesture,error")
    throw ParseError(file.string() + ": bad header '" + line + "'");

  std::map<LabelKey, LabelRow> out;
  while (std::getline(f, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7)
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": expected 7 comma-separated fields");

    LabelKey key{cells[0], cells[1],
                 static_cast<int>(parse_long(cells[2], file, line_no))};
    LabelRow row;
    row.start_frame = parse_long(cells[3], file, line_no);
    row.end_frame = parse_long(cells[4], file, line_no);
    if (cells[5].size() < 2 || cells[5][0] != 'G')
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": bad gesture token '" + cells[5] + "'");
    row.gesture_id = static_cast<int>(parse_long(cells[5].substr(1), file, line_no));
    const long err = parse_long(cells[6], file, line_no);
    if (err != 0 && err != 1)
      throw ValidationError(file.string() + ":" + std::to_string(line_no) +
                            ": error label must be 0 or 1, got " + cells[6]);
    row.error = static_cast<int>(err);
    if (!out.emplace(key, row).second)
      throw ValidationError(file.string() + ":" + std::to_string(line_no) +
                            ": duplicate label key (" + key.task + "," + key.trial + "," +
                            std::to_string(key.gesture_index) + ")");
  }
  return out;
}

bool parse_trial_stem(const std::string& stem, std::string& subject, int& repetition) {
  const auto us = stem.rfind('_');
  if (us == std::string::npos || us + 1 >= stem.size()) return false;
  const std::string tail = stem.substr(us + 1);
  size_t d = 0;
  while (d < tail.size() && !std::isdigit(static_cast<unsigned char>(tail[d]))) ++d;
  if (d == 0 || d == tail.size()) return false;
  for (size_t i = d; i < tail.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(tail[i]))) return false;
  subject = tail.substr(0, d);
  repetition = std::stoi(tail.substr(d));
  return true;
}

DatasetManifest assemble_dataset(const std::filesystem::path& root,
                                 const std::filesystem::path& labels_csv,
                                 std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  DatasetManifest manifest;
  manifest.root = root;

  auto labels = parse_error_labels(labels_csv);
  std::set<LabelKey> used_labels;
  std::vector<std::string> unlabeled;

  for (TaskClass task : {TaskClass::Suturing, TaskClass::NeedlePassing}) {
    const fs::path task_dir = root / task_name(task);
    if (!fs::exists(task_dir)) continue;
    fs::path kin_dir = task_dir / "kinematics" / "AllGestures";
    if (!fs::exists(kin_dir)) kin_dir = task_dir / "kinematics";
    const fs::path tr_dir = task_dir / "transcriptions";
    if (!fs::exists(kin_dir) || !fs::exists(tr_dir))
      throw ValidationError("dataset root lacks kinematics/transcriptions under " +
                            task_dir.string());

    std::vector<fs::path> kin_files;
    for (const auto& e : fs::directory_iterator(kin_dir))
      if (e.is_regular_file() && e.path().extension() == ".txt")
        kin_files.push_back(e.path());
    std::sort(kin_files.begin(), kin_files.end());

    for (const fs::path& kf : kin_files) {
      const std::string stem = kf.stem().string();
      const fs::path tf = tr_dir / (stem + ".txt");
      if (!fs::exists(tf)) {
        if (warnings)
          warnings->push_back(stem + ": kinematics without transcript, trial skipped");
        continue;
      }

      TrialRecord trial;
      trial.task = task;
      trial.trial_id = stem;
      if (!parse_trial_stem(stem, trial.subject_id, trial.repetition_index))
        throw ValidationError(stem + ": trial name does not match <Task>_<Subject><Rep>");
      if (trial.repetition_index < 1 || trial.repetition_index > 5)
        throw ValidationError(stem + ": repetition index " +
                              std::to_string(trial.repetition_index) +
                              " outside [1,5]");
      trial.samples = parse_kinematics(kf, warnings);
      trial.gesture_instances = parse_transcript(tf, warnings);

      const long n = static_cast<long>(trial.samples.size());
      for (size_t gidx = 0; gidx < trial.gesture_instances.size(); ++gidx) {
        GestureInstance& gi = trial.gesture_instances[gidx];
        if (gi.start_frame < 0 || gi.end_frame >= n)
          throw ValidationError(stem + ": gesture instance " + std::to_string(gidx + 1) +
                                " frame range [" + std::to_string(gi.start_frame) + "," +
                                std::to_string(gi.end_frame) +
                                "] outside kinematics length " + std::to_string(n));

        const LabelKey key{task_name(task), stem, static_cast<int>(gidx + 1)};
        const auto it = labels.find(key);
        if (it == labels.end()) {
          if (gi.in_library())
            unlabeled.push_back(stem + " #" + std::to_string(gidx + 1) + " (G" +
                                std::to_string(gi.gesture_id) + ")");
          continue;
        }
        const LabelRow& row = it->second;
        if (row.start_frame != gi.start_frame || row.end_frame != gi.end_frame ||
            row.gesture_id != gi.gesture_id)
          throw ValidationError(stem + " #" + std::to_string(gidx + 1) +
                                ": label row disagrees with transcript");
        gi.error_label = row.error;
        used_labels.insert(key);
      }
      manifest.trials.push_back(std::move(trial));
    }
  }

  if (!unlabeled.empty()) {
    std::string msg = "unlabeled gesture instances:";
    for (const auto& u : unlabeled) msg += " " + u;
    throw ValidationError(msg);
  }
  for (const auto& [key, row] : labels)
    if (!used_labels.count(key))
      throw ValidationError("label without matching transcript instance: (" + key.task +
                            "," + key.trial + "," + std::to_string(key.gesture_index) +
                            ")");

  std::sort(manifest.trials.begin(), manifest.trials.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              return std::tie(a.task, a.trial_id) < std::tie(b.task, b.trial_id);
            });

  std::set<std::string> ids;
  for (const auto& t : manifest.trials)
    if (!ids.insert(task_name(t.task) + "/" + t.trial_id).second)
      throw ValidationError("duplicate trial id " + t.trial_id);
  return manifest;
}

std::vector<LosoFold> split_loso_folds(const DatasetManifest& manifest) {
  std::set<int> reps;
  for (const auto& t : manifest.trials) {
    if (t.repetition_index < 1 || t.repetition_index > 5)
      throw ValidationError(t.trial_id + ": repetition index outside [1,5]");
    reps.insert(t.repetition_index);
  }
  if (reps.size() != 5)
    throw ValidationError("cannot form 5 LOSO folds: dataset covers " +
                          std::to_string(reps.size()) + " repetition indices");

  std::vector<LosoFold> folds;
  for (int r = 1; r <= 5; ++r) {
    LosoFold fold;
    fold.held_out_repetition = r;
    for (size_t i = 0; i < manifest.trials.size(); ++i) {
      if (manifest.trials[i].repetition_index == r)
        fold.test_trials.push_back(static_cast<int>(i));
      else
        fold.train_trials.push_back(static_cast<int>(i));
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

std::map<std::pair<TaskClass, int>, std::pair<int, int>> instance_counts(
    const DatasetManifest& manifest) {
  std::map<std::pair<TaskClass, int>, std::pair<int, int>> counts;
  for (const auto& t : manifest.trials)
    for (const auto& gi : t.gesture_instances) {
      if (!gi.in_library()) continue;
      auto& c = counts[{t.task, gi.gesture_id}];
      c.first += 1;
      if (gi.error_label == 1) c.second += 1;
    }
  return counts;
}

}  // namespace egd::dataio
