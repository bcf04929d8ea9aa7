#include "sensenet/stemmer.hpp"

#include <cstring>

namespace sensenet {

namespace {

struct Stemmer {
  std::string b;
  int k = 0;  // index of last letter
  int j = 0;  // stem end set by ends()

  bool cons(int i) const {
    switch (b[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int m() const {
    int n = 0;
    int i = 0;
    while (true) {
      if (i > j) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool doublec(int q) const {
    if (q < 1) return false;
    if (b[q] != b[q - 1]) return false;
    return cons(q);
  }

  // consonant-vowel-consonant ending where the final consonant is not
  // w, x or y; signals a short stem like "hop" in "hopping".
  bool cvc(int q) const {
    if (q < 2 || !cons(q) || cons(q - 1) || !cons(q - 2)) return false;
    char ch = b[q];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(const char* s) {
    int len = static_cast<int>(std::strlen(s));
    if (len > k + 1) return false;
    if (b.compare(k - len + 1, len, s) != 0) return false;
    j = k - len;
    return true;
  }

  void setto(const char* s) {
    int len = static_cast<int>(std::strlen(s));
    b.replace(j + 1, b.size() - j - 1, s);
    k = j + len;
  }

  void replace_if_m(const char* s) {
    if (m() > 0) setto(s);
  }

  void step1ab() {
    if (b[k] == 's') {
      if (ends("sses"))
        k -= 2;
      else if (ends("ies"))
        setto("i");
      else if (b[k - 1] != 's')
        --k;
    }
    if (ends("eed")) {
      if (m() > 0) --k;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k = j;
      if (ends("at"))
        setto("ate");
      else if (ends("bl"))
        setto("ble");
      else if (ends("iz"))
        setto("ize");
      else if (doublec(k)) {
        --k;
        char ch = b[k];
        if (ch == 'l' || ch == 's' || ch == 'z') ++k;
      } else if (m() == 1 && cvc(k)) {
        setto("e");
      }
    }
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b[k] = 'i';
  }

  void step2() {
    switch (b[k - 1]) {
      case 'a':
        if (ends("ational")) { replace_if_m("ate"); break; }
        if (ends("tional")) { replace_if_m("tion"); break; }
        break;
      case 'c':
        if (ends("enci")) { replace_if_m("ence"); break; }
        if (ends("anci")) { replace_if_m("ance"); break; }
        break;
      case 'e':
        if (ends("izer")) { replace_if_m("ize"); break; }
        break;
      case 'l':
        if (ends("abli")) { replace_if_m("able"); break; }
        if (ends("alli")) { replace_if_m("al"); break; }
        if (ends("entli")) { replace_if_m("ent"); break; }
        if (ends("eli")) { replace_if_m("e"); break; }
        if (ends("ousli")) { replace_if_m("ous"); break; }
        break;
      case 'o':
        if (ends("ization")) { replace_if_m("ize"); break; }
        if (ends("ation")) { replace_if_m("ate"); break; }
        if (ends("ator")) { replace_if_m("ate"); break; }
        break;
      case 's':
        if (ends("alism")) { replace_if_m("al"); break; }
        if (ends("iveness")) { replace_if_m("ive"); break; }
        if (ends("fulness")) { replace_if_m("ful"); break; }
        if (ends("ousness")) { replace_if_m("ous"); break; }
        break;
      case 't':
        if (ends("aliti")) { replace_if_m("al"); break; }
        if (ends("iviti")) { replace_if_m("ive"); break; }
        if (ends("biliti")) { replace_if_m("ble"); break; }
        break;
      default:
        break;
    }
  }

  void step3() {
    switch (b[k]) {
      case 'e':
        if (ends("icate")) { replace_if_m("ic"); break; }
        if (ends("ative")) { replace_if_m(""); break; }
        if (ends("alize")) { replace_if_m("al"); break; }
        break;
      case 'i':
        if (ends("iciti")) { replace_if_m("ic"); break; }
        break;
      case 'l':
        if (ends("ical")) { replace_if_m("ic"); break; }
        if (ends("ful")) { replace_if_m(""); break; }
        break;
      case 's':
        if (ends("ness")) { replace_if_m(""); break; }
        break;
      default:
        break;
    }
  }

  void step4() {
    switch (b[k - 1]) {
      case 'a':
        if (ends("al")) break;
        return;
      case 'c':
        if (ends("ance")) break;
        if (ends("ence")) break;
        return;
      case 'e':
        if (ends("er")) break;
        return;
      case 'i':
        if (ends("ic")) break;
        return;
      case 'l':
        if (ends("able")) break;
        if (ends("ible")) break;
        return;
      case 'n':
        if (ends("ant")) break;
        if (ends("ement")) break;
        if (ends("ment")) break;
        if (ends("ent")) break;
        return;
      case 'o':
        if (ends("ion") && j >= 0 && (b[j] == 's' || b[j] == 't')) break;
        if (ends("ou")) break;
        return;
      case 's':
        if (ends("ism")) break;
        return;
      case 't':
        if (ends("ate")) break;
        if (ends("iti")) break;
        return;
      case 'u':
        if (ends("ous")) break;
        return;
      case 'v':
        if (ends("ive")) break;
        return;
      case 'z':
        if (ends("ize")) break;
        return;
      default:
        return;
    }
    if (m() > 1) k = j;
  }

  void step5() {
    j = k;
    if (b[k] == 'e') {
      int a = m();
      if (a > 1 || (a == 1 && !cvc(k - 1))) --k;
    }
    if (b[k] == 'l' && doublec(k) && m() > 1) --k;
  }
};

}  // namespace

std::string porter_stem(const std::string& word) {
  if (word.size() <= 2) return word;
  for (char c : word)
    if (c < 'a' || c > 'z') return word;
  Stemmer st;
  st.b = word;
  st.k = static_cast<int>(word.size()) - 1;
  st.step1ab();
  st.step1c();
  st.step2();
  st.step3();
  st.step4();
  st.step5();
  st.b.resize(st.k + 1);
  return st.b;
}

}  // namespace sensenet
