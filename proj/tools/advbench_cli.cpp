#include <iostream>

int main() {
    std::cout << "advbench cli placeholder\n";
    return 0;
}
