#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace avua {

// Template names double as transcript tags.
namespace prompt_names {
inline constexpr const char* policy = "policy";
inline constexpr const char* agent = "agent";
inline constexpr const char* sampler = "sampler";
inline constexpr const char* evaluator = "evaluator";
inline constexpr const char* refiner = "refiner";
inline constexpr const char* judge = "judge";
}  // namespace prompt_names

// Named prompt templates. Starts from the built-in catalog; a prompts
// directory of <name>.txt files overrides entries by name.
class PromptCatalog {
public:
    PromptCatalog();
    static PromptCatalog from_directory(const std::filesystem::path& dir);

    const std::string& get(const std::string& name) const;
    bool contains(const std::string& name) const { return templates_.count(name) > 0; }
    std::vector<std::string> names() const;
    void set(const std::string& name, std::string text) { templates_[name] = std::move(text); }

private:
    std::map<std::string, std::string> templates_;
};

}  // namespace avua
