#include <iostream>

int main()
{
  std::cout << "ees: placeholder\n";
  return 0;
}
