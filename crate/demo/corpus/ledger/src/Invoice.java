package ledger;

public class Invoice {
    private final int[] quantities;
    private final int[] prices;

    public Invoice(int[] quantities, int[] prices) {
        this.quantities = quantities;
        this.prices = prices;
    }

    public int subtotal() {
        int sum = 0;
        for (int i = 0; i < quantities.length; i++) {
            int line = quantities[i] * prices[i];
            sum = sum + line;
        }
        return sum;
    }

    public int tax(int percent) {
        int sub = subtotal();
        return sub * percent / 100;
    }

    public int total(int percent, int discount) {
        int sub = subtotal();
        int t = tax(percent);
        return sub + t - discount;
    }

    public int largestLine() {
        int best = 0;
        for (int i = 0; i < prices.length; i++) {
            int line = prices[i] * quantities[i];
            if (line > best) {
                best = line;
            }
        }
        return best;
    }

    public boolean qualifiesForShipping(int minimum) {
        int sub = subtotal();
        return sub >= minimum;
    }

    public int itemCount() {
        int count = 0;
        for (int i = 0; i < quantities.length; i++) {
            count += quantities[i];
        }
        return count;
    }
}
