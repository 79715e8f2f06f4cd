method Classify(x: int) returns (c: int)
  ensures -1 <= c <= 1
{
  if x < 0 {
    c := -1;
    assert c < 0;
  } else if x == 0 {
    c := 0;
  } else {
    c := 1;
    assert c > 0 && c <= 1;
  }
}
