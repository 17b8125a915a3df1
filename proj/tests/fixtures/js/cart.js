/**
 * Compute the total price of every item in the cart.
 */
function cartTotal(items, taxRate) {
  let total = 0;
  // accumulate the price of each item
  for (const item of items) {
    total += item.price * item.qty; // price times quantity
  }
  // apply tax when the rate is positive
  if (taxRate > 0) {
    total = total * (1 + taxRate);
  } else {
    console.log("no tax");
  }
  return total;
}

function helper(x) {
  return x + 1;
}
