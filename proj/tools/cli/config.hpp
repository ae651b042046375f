#pragma once

#include <initializer_list>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "dforge/regular_data.hpp"
#include "dforge/sampler.hpp"

namespace dforge::cli {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1.0";

// Invalid configuration; `path` is a JSON pointer-like location such as
// families[1].covariance.matrix.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& msg)
      : std::runtime_error(path + ": " + msg), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Typed accessors that throw ConfigError naming the offending field.
const json& field(const json& obj, const std::string& key, const std::string& path);
const json* optional_field(const json& obj, const std::string& key);
// Rejects keys outside `allowed`, like additionalProperties: false.
void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed);
double get_number(const json& j, const std::string& path);
long get_integer(const json& j, const std::string& path, long lo, long hi);
Vec get_vector(const json& j, const std::string& path, Eigen::Index dim = -1);
Mat get_matrix(const json& j, const std::string& path, Eigen::Index rows = -1, Eigen::Index cols = -1);
// Symmetric (to 1e-9 relative) and psd (to -1e-12 relative).
Mat get_psd_matrix(const json& j, const std::string& path, Eigen::Index d = -1);
// Columns of a d x K block from a list of K observation vectors.
Mat get_observations(const json& j, const std::string& path, Eigen::Index d);

// Set descriptors: singleton, box, ball, simplex, halfspaces, psd_interval.
// dim < 0 accepts any dimension.
SetPtr parse_set(const json& j, const std::string& path, Eigen::Index dim = -1);
// Covariance sets over vec'd d x d matrices: singleton (matrix) or psd_interval.
SetPtr parse_covariance_set(const json& j, const std::string& path, Eigen::Index d);

enum class Kind { gaussian, poisson, discrete };

struct Family {
  Kind kind = Kind::gaussian;
  Eigen::Index dim = 0;  // observation dimension
  RegularData data;
};

Family parse_family(const json& j, const std::string& path);
std::vector<Family> parse_families(const json& cfg);

// Observation law with parameter mu (a point of the family's parameter space).
SamplerPtr family_sampler(const Family& f, const Vec& mu, const std::string& path);
// {"kind": gaussian|poisson|discrete, ...} sampler descriptor.
SamplerPtr parse_sampler(const json& j, const std::string& path);

// Checks the top-level shape shared by every task.
void check_top_level(const json& cfg);

}  // namespace dforge::cli
