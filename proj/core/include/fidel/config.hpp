#ifndef FIDEL_CONFIG_HPP_
#define FIDEL_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

namespace fidel {

// Flat "key = value" configuration; '#' starts a comment. CLI flags are
// merged on top via set().
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // comma-separated integer list
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         std::vector<std::size_t> fallback) const;
  std::vector<std::string> get_str_list(const std::string& key,
                                        std::vector<std::string> fallback) const;

  // verbatim snapshot, sorted by key
  void write(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fidel

#endif  // FIDEL_CONFIG_HPP_
