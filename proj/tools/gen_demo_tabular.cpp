// Generates the bundled demo tabular dataset: census-income style columns
// (6 numerical, 8 categorical, binary label) drawn from a fixed synthetic
// process with a latent skill variable tying features to the label. Used to
// produce data/adult_train.csv, data/adult_test.csv and data/adult.schema.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpmerf/rng.hpp"

namespace fs = std::filesystem;
using dpmerf::SplitMix64;

namespace {

const char* kHeader =
    "age,workclass,fnlwgt,education,education-num,marital-status,occupation,"
    "relationship,race,sex,capital-gain,capital-loss,hours-per-week,"
    "native-country,income";

const std::vector<std::string> kWorkclass = {
    "Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov",
    "Local-gov", "State-gov", "Without-pay"};
const std::vector<std::string> kEducation = {
    "Dropout", "HS-grad", "Some-college", "Assoc", "Bachelors", "Masters", "Doctorate"};
const std::vector<std::string> kMarital = {
    "Married-civ-spouse", "Never-married", "Divorced", "Separated", "Widowed"};
const std::vector<std::string> kOccupation = {
    "Exec-managerial", "Prof-specialty", "Tech-support", "Sales",
    "Craft-repair", "Adm-clerical", "Machine-op-inspct", "Transport-moving",
    "Handlers-cleaners", "Other-service", "Farming-fishing"};
const std::vector<std::string> kRelationship = {
    "Husband", "Wife", "Not-in-family", "Own-child", "Unmarried", "Other-relative"};
const std::vector<std::string> kRace = {
    "White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"};
const std::vector<std::string> kSex = {"Male", "Female"};
const std::vector<std::string> kCountry = {
    "United-States", "Mexico", "Philippines", "Germany", "Canada", "India", "Other"};

int pick(SplitMix64& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.next_unit() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string make_row(SplitMix64& rng) {
  // Latent skill in (0, 1) drives education, occupation, hours and income.
  const double skill = std::clamp(0.5 + 0.22 * rng.next_gaussian() +
                                      0.25 * (rng.next_unit() - 0.5),
                                  0.02, 0.98);

  const int age = static_cast<int>(std::clamp(
      38.0 + 12.0 * rng.next_gaussian() + 8.0 * (skill - 0.5), 17.0, 80.0));

  const int edu_num = static_cast<int>(std::clamp(
      std::lround(3.0 + 11.0 * skill + 1.6 * rng.next_gaussian()), 1L, 16L));
  int edu_idx;
  if (edu_num <= 8) edu_idx = 0;        // Dropout
  else if (edu_num == 9) edu_idx = 1;   // HS-grad
  else if (edu_num == 10) edu_idx = 2;  // Some-college
  else if (edu_num <= 12) edu_idx = 3;  // Assoc
  else if (edu_num == 13) edu_idx = 4;  // Bachelors
  else if (edu_num == 14) edu_idx = 5;  // Masters
  else edu_idx = 6;                     // Doctorate

  const int sex = rng.next_unit() < 0.67 ? 0 : 1;  // Male / Female

  const int marital = pick(rng, {age < 26 ? 0.15 : 0.50, age < 26 ? 0.75 : 0.25,
                                 0.15, 0.05, age > 55 ? 0.10 : 0.02});
  const bool married = marital == 0;

  int relationship;
  if (married) relationship = sex == 0 ? 0 : 1;  // Husband / Wife
  else relationship = 2 + pick(rng, {0.4, age < 25 ? 0.4 : 0.1, 0.3, 0.1});

  const int workclass = pick(rng, {0.72, 0.06, 0.03 + 0.04 * skill, 0.04,
                                   0.06, 0.04, 0.01});

  // High-skill occupations get likelier with skill.
  const double s2 = skill * skill;
  const int occupation = pick(
      rng, {0.05 + 0.35 * s2, 0.05 + 0.35 * s2, 0.04 + 0.08 * skill,
            0.10, 0.14 * (1.0 - skill) + 0.02, 0.10, 0.09 * (1.0 - skill) + 0.01,
            0.07 * (1.0 - skill) + 0.01, 0.07 * (1.0 - skill) + 0.01,
            0.12 * (1.0 - skill) + 0.02, 0.05 * (1.0 - skill) + 0.01});

  const int race = pick(rng, {0.85, 0.07, 0.04, 0.02, 0.02});
  const int country = pick(rng, {0.90, 0.025, 0.02, 0.015, 0.015, 0.015, 0.01});

  const int hours = static_cast<int>(std::clamp(
      std::lround(34.0 + 16.0 * skill + 7.0 * rng.next_gaussian() +
                  (married ? 2.0 : 0.0)),
      5L, 99L));

  double capital_gain = 0.0;
  if (rng.next_unit() < 0.04 + 0.10 * s2)
    capital_gain = std::min(99999.0, std::floor(std::exp(7.6 + 1.1 * rng.next_gaussian())));
  double capital_loss = 0.0;
  if (rng.next_unit() < 0.04)
    capital_loss = std::min(4356.0, std::floor(std::exp(7.3 + 0.35 * rng.next_gaussian())));

  const double fnlwgt = std::floor(std::exp(11.9 + 0.55 * rng.next_gaussian()));

  const double logit = -5.4 + 6.2 * skill + 1.5 * (married ? 1.0 : 0.0) +
                       0.030 * (hours - 40) + 0.012 * (age - 38) +
                       (capital_gain > 0 ? 1.3 : 0.0) - 0.25 * sex +
                       0.9 * rng.next_gaussian();
  const int income = rng.next_unit() < logistic(logit) ? 1 : 0;

  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%s,%.0f,%s,%d,%s,%s,%s,%s,%s,%.0f,%.0f,%d,%s,%s",
                age, kWorkclass[workclass].c_str(), fnlwgt,
                kEducation[edu_idx].c_str(), edu_num, kMarital[marital].c_str(),
                kOccupation[occupation].c_str(), kRelationship[relationship].c_str(),
                kRace[race].c_str(), kSex[sex].c_str(), capital_gain, capital_loss,
                hours, kCountry[country].c_str(), income ? ">50K" : "<=50K");
  return buf;
}

void write_rows(const std::string& path, int rows, SplitMix64& rng) {
  std::ofstream out(path);
  out << kHeader << "\n";
  for (int i = 0; i < rows; ++i) out << make_row(rng) << "\n";
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] + (i + 1 < v.size() ? "|" : "");
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the bundled demo tabular dataset"};
  std::string out_dir = "data";
  int train_rows = 10000, test_rows = 5000;
  std::uint64_t seed = 20240501;
  app.add_option("--out-dir", out_dir);
  app.add_option("--train-rows", train_rows);
  app.add_option("--test-rows", test_rows);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(out_dir);
  SplitMix64 rng(seed);
  write_rows((fs::path(out_dir) / "adult_train.csv").string(), train_rows, rng);
  write_rows((fs::path(out_dir) / "adult_test.csv").string(), test_rows, rng);

  std::ofstream schema(fs::path(out_dir) / "adult.schema");
  schema << "age numerical\n"
         << "workclass categorical " << join(kWorkclass) << "\n"
         << "fnlwgt numerical\n"
         << "education categorical " << join(kEducation) << "\n"
         << "education-num numerical\n"
         << "marital-status categorical " << join(kMarital) << "\n"
         << "occupation categorical " << join(kOccupation) << "\n"
         << "relationship categorical " << join(kRelationship) << "\n"
         << "race categorical " << join(kRace) << "\n"
         << "sex categorical " << join(kSex) << "\n"
         << "capital-gain numerical\n"
         << "capital-loss numerical\n"
         << "hours-per-week numerical\n"
         << "native-country categorical " << join(kCountry) << "\n"
         << "income label <=50K|>50K\n";
  std::printf("wrote %d train and %d test rows under %s\n", train_rows, test_rows,
              out_dir.c_str());
  return 0;
}
