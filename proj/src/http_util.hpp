#pragma once

// Internal helpers for the HTTP-backed providers.

#include <string>
#include <string_view>

#include "vleval/errors.hpp"

namespace vleval::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/'
};

inline SplitUrl split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw ConfigError("endpoint \"" + std::string(url) + "\" is not an absolute http(s) URL");
  }
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("endpoint \"" + std::string(url) + "\" must use http or https");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

}  // namespace vleval::detail
