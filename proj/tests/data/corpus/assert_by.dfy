lemma Helper(x: int)
  ensures x * 0 == 0
{
}

method UsesBy(x: int) returns (y: int)
  ensures y == 0
{
  y := x * 0;
  assert y == 0 by {
    Helper(x);
    assert x * 0 == 0;
  }
}
