method Evens(n: nat) returns (s: set<nat>)
  ensures forall x :: x in s ==> x % 2 == 0
{
  s := set x | 0 <= x < n && x % 2 == 0;
  assert forall x :: x in s ==> x % 2 == 0;
}

method MapKeys(m: map<int, int>) returns (k: set<int>)
  ensures k == m.Keys
{
  k := m.Keys;
  assert k == set x | x in m :: x;
}
