#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "egd/errors.hpp"

namespace egd::dataio {

enum class TaskClass { Suturing, NeedlePassing };

std::string task_name(TaskClass t);        // "Suturing" / "Needle_Passing"
std::optional<TaskClass> parse_task(const std::string& name);

// Gesture library and the subset used for modeling. G8/G9 are parsed and
// counted but excluded from default experiments (too few erroneous trials);
// anything else (G5, G7, ...) is retained with a warning and never modeled.
inline constexpr std::array<int, 7> kGestureLibrary = {1, 2, 3, 4, 6, 8, 9};
inline constexpr std::array<int, 5> kModeledGestures = {1, 2, 3, 4, 6};

bool in_gesture_library(int gesture_id);
bool is_modeled_gesture(int gesture_id);

enum class ErrorMode { MultipleAttempts, OutOfView, NeedleOrientation };

// Table-driven executional error modes per gesture.
const std::vector<ErrorMode>& gesture_error_modes(int gesture_id);

struct ArmSample {
  std::array<double, 3> position{};             // m
  std::array<double, 9> rotation{};             // 3x3 row-major, orthonormal
  std::array<double, 3> linear_velocity{};      // m/s
  std::array<double, 3> rotational_velocity{};  // rad/s
  double gripper_angle = 0.0;                   // rad
};

struct RawKinematicSample {
  ArmSample left, right;  // PSM1 -> left, PSM2 -> right
};

struct GestureInstance {
  int gesture_id = 0;
  long start_frame = 0, end_frame = 0;  // inclusive, 30 Hz frames, 0-based
  int error_label = -1;                 // 0 normal, 1 erroneous, -1 unlabeled
  std::set<ErrorMode> error_modes;

  bool in_library() const { return in_gesture_library(gesture_id); }
  bool modeled() const { return is_modeled_gesture(gesture_id); }
  long frame_count() const { return end_frame - start_frame + 1; }
};

struct TrialRecord {
  TaskClass task = TaskClass::Suturing;
  std::string trial_id;    // file stem, e.g. "Suturing_B001"
  std::string subject_id;  // e.g. "B"
  int repetition_index = 0;  // 1..5, the super-trial index
  std::vector<RawKinematicSample> samples;
  std::vector<GestureInstance> gesture_instances;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<TrialRecord> trials;
  bool synthetic = false;
  uint64_t seed = 0;
};

// JIGSAWS kinematics column map (0-based columns of the 76-column rows).
// Master-side columns 0..37 are ignored. Declarative so a layout correction
// is a table edit, not a code change.
struct PsmBlockLayout {
  int base;            // first column of the block
  int position = 0;    // offsets within the block
  int rotation = 3;    // 9 values, row-major
  int linear_velocity = 12;
  int rotational_velocity = 15;
  int gripper = 18;
};
inline constexpr int kKinematicColumns = 76;
inline constexpr PsmBlockLayout kPsm1{38};  // -> left
inline constexpr PsmBlockLayout kPsm2{57};  // -> right

// ---- parsing ----

std::vector<RawKinematicSample> parse_kinematics(const std::filesystem::path& file,
                                                 std::vector<std::string>* warnings = nullptr);

// transcript lines: "<start> <end> G<k>"
std::vector<GestureInstance> parse_transcript(const std::filesystem::path& file,
                                              std::vector<std::string>* warnings = nullptr);

// inverse of parse_transcript; parse-then-serialize reproduces the file
std::string serialize_transcript(const std::vector<GestureInstance>& instances);

struct LabelKey {
  std::string task;
  std::string trial;
  int gesture_index;  // 1-based position in the transcript
  auto operator<=>(const LabelKey&) const = default;
};

struct LabelRow {
  long start_frame, end_frame;
  int gesture_id;
  int error;
};

// CSV header: task,trial,gesture_index,start_frame,end_frame,gesture,error
std::map<LabelKey, LabelRow> parse_error_labels(const std::filesystem::path& file);

// Parse "<Task>_<Subject><Rep:3>" trial naming; returns subject and repetition.
bool parse_trial_stem(const std::string& stem, std::string& subject, int& repetition);

// ---- assembly and folds ----

// root holds <Task>/kinematics/AllGestures/*.txt and <Task>/transcriptions/*.txt
DatasetManifest assemble_dataset(const std::filesystem::path& root,
                                 const std::filesystem::path& labels_csv,
                                 std::vector<std::string>* warnings = nullptr);

struct LosoFold {
  int held_out_repetition;        // 1..5
  std::vector<int> train_trials;  // indices into manifest.trials
  std::vector<int> test_trials;
};

std::vector<LosoFold> split_loso_folds(const DatasetManifest& manifest);

// instance counts per (task, gesture): pair of (total, erroneous)
std::map<std::pair<TaskClass, int>, std::pair<int, int>> instance_counts(
    const DatasetManifest& manifest);

}  // namespace egd::dataio
