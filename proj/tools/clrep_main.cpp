#include <iostream>

int main() {
  std::cout << "clrep CLI placeholder\n";
  return 0;
}
