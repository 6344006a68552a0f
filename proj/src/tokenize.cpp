#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "vleval/errors.hpp"
#include "vleval/ngram_metrics.hpp"

namespace vleval {

namespace {

const icu::Normalizer2& nfkc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status) || norm == nullptr) throw Error("ICU NFKC normaliser unavailable");
  return *norm;
}

icu::UnicodeString normalize(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  auto out = nfkc().normalize(s, status);
  if (U_FAILURE(status)) throw Error("ICU normalisation failed");
  return out;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  auto ustr = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  ustr = normalize(ustr);
  ustr.toLower(icu::Locale::getRoot());
  // Lowercasing can leave the string outside NFKC for a handful of code points.
  ustr = normalize(ustr);

  std::vector<std::string> tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string utf8;
    current.toUTF8String(utf8);
    tokens.push_back(std::move(utf8));
    current.remove();
  };
  for (int32_t i = 0; i < ustr.length();) {
    UChar32 c = ustr.char32At(i);
    i += U16_LENGTH(c);
    if (u_ispunct(c) || u_isUWhiteSpace(c)) {
      flush();
    } else {
      current.append(c);
    }
  }
  flush();
  return TokenSequence(std::move(tokens));
}

std::string TokenSequence::join() const {
  std::string out;
  for (const auto& t : tokens_) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace vleval
