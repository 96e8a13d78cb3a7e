#include "avua/prompt_catalog.hpp"

#include "avua/error.hpp"
#include "avua/text_util.hpp"

namespace avua {

namespace detail {
const std::map<std::string, std::string>& builtin_prompts();
}

PromptCatalog::PromptCatalog() : templates_(detail::builtin_prompts()) {}

PromptCatalog PromptCatalog::from_directory(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("prompts directory not found: " + dir.string());
    PromptCatalog catalog;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        catalog.set(entry.path().stem().string(), read_file(entry.path().string()));
    }
    return catalog;
}

const std::string& PromptCatalog::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("no prompt template named '" + name + "'");
    return it->second;
}

std::vector<std::string> PromptCatalog::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : templates_) out.push_back(name);
    return out;
}

}  // namespace avua
